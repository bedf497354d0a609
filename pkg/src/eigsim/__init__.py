"""Classical simulation of ODE-encoded and phase-estimation eigenvalue algorithms."""

__version__ = "0.1.0"
