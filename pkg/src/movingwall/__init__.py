"""Quantum particle in a one-dimensional infinite well with moving walls."""
__version__ = "0.1.0"
