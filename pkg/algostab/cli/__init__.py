"""CLI module for the algorithm stability toolkit."""
