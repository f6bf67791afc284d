"""Test suite for the algorithm stability toolkit."""
