"""Distribution models package."""
