"""Declarative optical baseplate layout compiler."""

__version__ = "0.1.0"
