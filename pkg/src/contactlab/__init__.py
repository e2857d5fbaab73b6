"""Numerical toolkit for contact forms, open books and their constructions."""

__version__ = "0.1.0"
