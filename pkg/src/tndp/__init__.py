"""Discrete network design: equilibrium assignment, particle swarm search and enumeration."""

__version__ = "0.1.0"
