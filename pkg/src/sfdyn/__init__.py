"""Laser-driven electron-nuclear dynamics in Gaussian bases with an
adiabatic-projector absorbing potential."""

__version__ = "0.1.0"
