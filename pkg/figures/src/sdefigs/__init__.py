"""Renders the harness CSV files (drift traces and convergence tables)
into publication-style figures.  Talks to the integrator package only
through its CSV schemas.
"""

from .io import SchemaError, read_csv
from .render import FigureSpec, render

__all__ = ["FigureSpec", "SchemaError", "read_csv", "render"]

__version__ = "0.1.0"
