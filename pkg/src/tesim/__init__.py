"""Structure-preserving simulator for nonlinear thermoelasticity."""

__version__ = "0.1.0"
