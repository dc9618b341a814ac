"""Sparse partial least squares regression: classic PLS, jointly sparse global SIMPLS, and an l1 baseline."""

__version__ = "0.1.0"
