"""Numerical laboratory for skew diffusions with thin-shell interfaces."""
__version__ = "0.1.0"
