"""Operational symmetries of entangled states."""

__version__ = "0.1.0"
