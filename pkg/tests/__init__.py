"""Tests for the mean-field choice toolkit."""
