"""Batch figure generation for SKP unsourced-random-access sweep CSVs."""

__version__ = "0.1.0"

from .extract import extract_required_ebn0, interpolate_crossing, read_sweep_csv  # noqa: F401
from .render import CurveSpec, render  # noqa: F401
