"""Structured prediction under test-time feature budgets."""

__version__ = "0.1.0"
