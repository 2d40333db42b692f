"""Verification package: relaxation oracle and Monte Carlo validation."""
