"""Figure regeneration for safebandits experiment outputs."""

from .figures import FigureSpec, read_series_csv, read_sweep_csv, render

__version__ = "0.1.0"
