"""Certification of candidate solutions of multiobjective inequality-constrained programs."""

__version__ = "0.1.0"
