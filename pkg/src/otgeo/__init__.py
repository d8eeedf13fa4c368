"""Optimal transport geometry: the cost-induced pseudo-metric, transport maps and their graphs."""

__version__ = "0.1.0"
