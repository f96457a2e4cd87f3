"""Simulation toolkit for stimulated adiabatic rapid passage on a quantum-dot biexciton cascade."""

__version__ = "0.1.0"
