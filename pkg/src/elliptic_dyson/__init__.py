"""Elliptic Dyson models: theta-function martingales, kernels and SDE simulation."""

__version__ = "0.1.0"
