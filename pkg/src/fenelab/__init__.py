"""FENE dumbbell vanishing-viscosity laboratory."""

__version__ = "0.1.0"
