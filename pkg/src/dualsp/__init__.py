"""Dual learning for semantic parsing at desk scale."""

__version__ = "0.1.0"
