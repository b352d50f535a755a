"""Semantic composition and execution of jGASW-style wrapped web services."""

__version__ = "0.1.0"
