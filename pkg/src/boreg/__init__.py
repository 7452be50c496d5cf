"""Pseudospectral Benjamin-Ono simulator with regularity diagnostics."""

__version__ = "0.1.0"
