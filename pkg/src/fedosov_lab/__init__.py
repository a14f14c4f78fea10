"""Exact symbolic engine for Fedosov star products on symplectic charts."""

__version__ = "0.1.0"
