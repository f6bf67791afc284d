"""Shared numerical helpers: sampling, log-space products, statistics, plotting."""
