"""Numerical laboratory for bilinear wave multipliers on periodic grids."""

__version__ = "0.1.0"
