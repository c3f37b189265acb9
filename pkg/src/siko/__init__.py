"""Syntactically incomplete Korean (SIKO) data construction and measurement."""

__version__ = "0.1.0"
