"""Desk-scale laboratory for slack calculus on Z-covers of hyperbolic surfaces."""

__version__ = "0.1.0"
