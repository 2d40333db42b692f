"""Test design package."""
