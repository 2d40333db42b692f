"""Utils package."""

