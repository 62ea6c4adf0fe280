"""Simulation and verification of CBI processes, subordinators and extremal shot noise."""

__version__ = "0.1.0"
