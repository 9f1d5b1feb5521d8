"""Figure regeneration for skytrust sweep results."""

from .figures import (
    FIGURE_IDS,
    FigureSpec,
    MissingColumn,
    NoInputData,
    RenderResult,
    discover_runs,
    energy_ordering_holds,
    moving_average,
    render,
    render_from_results,
)

__version__ = "0.1.0"
