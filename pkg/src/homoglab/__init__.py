"""Numerical laboratory for front propagation in random space-time media."""

__version__ = "0.1.0"
