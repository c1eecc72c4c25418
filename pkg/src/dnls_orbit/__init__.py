"""Discrete NLS soliton dynamics: splitting integrators, discrete solitons and modified energies."""

__version__ = "0.1.0"
