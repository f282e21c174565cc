"""Conditional dynamics of two waveguide-coupled qubits under continuous monitoring."""

__version__ = "0.1.0"
