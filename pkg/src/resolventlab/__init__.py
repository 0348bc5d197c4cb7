"""Radial resolvent and local-smoothing verification toolkit."""
