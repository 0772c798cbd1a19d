"""Exact GHZ-state algebra, noise models, fidelity estimation protocols and the Monte Carlo harness."""

__version__ = "0.1.0"
