"""Masking reward behaviour trees."""

__version__ = "0.1.0"
