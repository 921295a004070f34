"""Multistep guess-and-determine solving of polynomial systems over small prime fields."""

__version__ = "0.1.0"
