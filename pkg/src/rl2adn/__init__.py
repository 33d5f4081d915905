"""LLM-refined penalty functions for safe SAC energy management of distribution feeders."""

__version__ = "0.1.0"
