"""Post-hoc report rendering for gkflow CSV artifacts."""

from .bundle import SeriesBundle, load_series, load_refinement, classify
from .render import render_report, render_series_figures, render_refinement_figure, fit_slope

__all__ = [
    "SeriesBundle",
    "load_series",
    "load_refinement",
    "classify",
    "render_report",
    "render_series_figures",
    "render_refinement_figure",
    "fit_slope",
]

__version__ = "0.1.0"
