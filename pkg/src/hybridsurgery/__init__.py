"""Hybrid lattice surgery between quantum double codes."""

__version__ = "0.1.0"
