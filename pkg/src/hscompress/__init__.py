"""Hilbert space compression of finitely generated groups."""

__version__ = "0.1.0"
