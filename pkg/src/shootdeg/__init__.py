"""Degree-theory shooting for radial elliptic systems with sign-changing sources."""

__version__ = "0.1.0"
