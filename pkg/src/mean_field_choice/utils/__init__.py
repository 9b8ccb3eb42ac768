"""Utility functions for tool results and distribution statistics."""
