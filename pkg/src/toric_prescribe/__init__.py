"""Numerical approximation of Ricci solitons and quasi-Einstein metrics on toric surfaces."""

__version__ = "0.1.0"
