"""Quantum logic, quantum walks, Fock-space calculus and SLH networks behind a Horn-clause front end."""

__version__ = "0.1.0"
