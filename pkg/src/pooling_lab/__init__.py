"""Simulation laboratory for dynamic pooling of delivery jobs."""

__version__ = "0.1.0"
