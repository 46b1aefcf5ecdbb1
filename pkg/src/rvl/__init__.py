"""Numerical toolkit for prime-orbit averages, their multipliers and variational seminorms."""

__version__ = "0.1.0"
