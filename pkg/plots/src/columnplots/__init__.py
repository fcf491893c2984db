"""Static figure rendering for aircolumn solver CSV outputs."""

__version__ = "1.0.0"

from .render import (
    InputFormatError,
    PlotJob,
    read_rates_csv,
    read_solution_csv,
    render_heatmaps,
    render_rate_table,
)

__all__ = [
    "InputFormatError",
    "PlotJob",
    "read_rates_csv",
    "read_solution_csv",
    "render_heatmaps",
    "render_rate_table",
]
