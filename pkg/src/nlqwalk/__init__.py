"""Nonlinear discrete-time quantum walks on a cycle: simulation and regime analysis."""

__version__ = "0.1.0"
