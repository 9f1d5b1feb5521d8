"""Figure generation from sweep result directories.

Reads only the documented result files: each run directory's
`summary.json` (for the method name) and `rounds.csv` (the per-round
series). Rendering is a pure view: inputs are never modified and the same
inputs produce byte-identical output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = (
    "accuracy_time",
    "detection_time",
    "energy_rounds",
    "detection_vs_overhead",
)

METHOD_LABELS = {"dtsam": "DTSAM-EAC", "cte": "CTE", "sbst": "SBST"}
METHOD_ORDER = ("dtsam", "cte", "sbst")
METHOD_COLORS = {"dtsam": "#1b7837", "cte": "#b2182b", "sbst": "#2166ac"}

ROUNDS_COLUMNS = (
    "round",
    "accuracy",
    "detection_rate",
    "cumulative_energy_joules",
    "cumulative_comm_mb_per_uav",
)

# fixed salt keeps matplotlib's generated SVG ids reproducible
plt.rcParams["svg.hashsalt"] = "plotkit"


class MissingColumn(ValueError):
    """A rounds.csv lacked one of the documented columns."""


class NoInputData(ValueError):
    """The results directory held no readable runs at all."""


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    csv_paths: dict[str, list[Path]]  # method -> rounds.csv files (one per seed)
    out_path: Path
    smooth: int = 1  # moving-average width; 1 plots the raw points

    def __post_init__(self):
        if self.figure not in FIGURE_IDS:
            raise ValueError(f"figure={self.figure!r} not one of {FIGURE_IDS}")
        if self.smooth < 1:
            raise ValueError("smooth must be >= 1")


@dataclass
class RenderResult:
    path: Path
    series_labels: list[str]
    warnings: list[str] = field(default_factory=list)


def discover_runs(results_dir: str | Path) -> dict[str, list[Path]]:
    """Map method name to its rounds.csv files under a results directory."""
    results_dir = Path(results_dir)
    found: dict[str, list[Path]] = {}
    for summary_path in sorted(results_dir.glob("**/summary.json")):
        try:
            summary = json.loads(summary_path.read_text())
            method = summary["method"]
        except (json.JSONDecodeError, KeyError):
            continue
        rounds = summary_path.parent / "rounds.csv"
        if rounds.exists():
            found.setdefault(method, []).append(rounds)
    return found


def load_series(path: Path, column: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise MissingColumn(f"column {column!r} missing from {path}")
        values = [row[column] for row in reader]
    return np.array([float(v) if v != "" else np.nan for v in values])


def mean_series(paths: list[Path], column: str) -> np.ndarray:
    """Per-round mean across seeds; series are trimmed to the shortest run."""
    series = [load_series(p, column) for p in paths]
    length = min(len(s) for s in series)
    return np.mean([s[:length] for s in series], axis=0)


def moving_average(values: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return values
    return np.convolve(values, np.ones(width) / width, mode="valid")


def energy_ordering_holds(energy_by_method: dict[str, np.ndarray]) -> bool:
    """True when the proposed method's cumulative energy is lowest at every round."""
    if "dtsam" not in energy_by_method:
        return False
    ours = energy_by_method["dtsam"]
    others = [v for k, v in energy_by_method.items() if k != "dtsam"]
    if not others:
        return False
    length = min(min(len(v) for v in others), len(ours))
    return all(bool(np.all(ours[:length] < v[:length])) for v in others)


_AXES = {
    "accuracy_time": ("Round", "Trust score prediction accuracy (%)"),
    "detection_time": ("Round", "Rogue UAV detection rate (%)"),
    "energy_rounds": ("Round", "Cumulative energy consumption (J)"),
    "detection_vs_overhead": (
        "Communication overhead (MB per UAV)",
        "Rogue UAV detection rate (%)",
    ),
}


def _figure_series(spec: FigureSpec, method: str) -> tuple[np.ndarray, np.ndarray]:
    paths = spec.csv_paths[method]
    if spec.figure == "accuracy_time":
        y = mean_series(paths, "accuracy") * 100.0
        x = np.arange(len(y))
    elif spec.figure == "detection_time":
        y = mean_series(paths, "detection_rate") * 100.0
        x = np.arange(len(y))
    elif spec.figure == "energy_rounds":
        y = mean_series(paths, "cumulative_energy_joules")
        x = np.arange(len(y))
    else:
        y = mean_series(paths, "detection_rate") * 100.0
        x = mean_series(paths, "cumulative_comm_mb_per_uav")
    if spec.smooth > 1:
        y = moving_average(y, spec.smooth)
        x = x[spec.smooth - 1 :][: len(y)] if len(x) > len(y) else x[: len(y)]
    return x, y


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure with a labeled line per available method."""
    warnings: list[str] = []
    labels: list[str] = []
    methods = [m for m in METHOD_ORDER if m in spec.csv_paths] + [
        m for m in spec.csv_paths if m not in METHOD_ORDER
    ]
    for m in METHOD_ORDER:
        if m not in spec.csv_paths:
            warnings.append(f"no runs found for method {METHOD_LABELS.get(m, m)}; series omitted")
    if not methods:
        raise NoInputData("no method series to plot")

    if spec.figure == "energy_rounds":
        energy = {m: mean_series(spec.csv_paths[m], "cumulative_energy_joules") for m in methods}
        if len(energy) > 1 and not energy_ordering_holds(energy):
            warnings.append("cumulative energy ordering does not favor DTSAM-EAC at every round")

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for method in methods:
        x, y = _figure_series(spec, method)
        label = METHOD_LABELS.get(method, method)
        ax.plot(x, y, label=label, color=METHOD_COLORS.get(method), linewidth=1.8)
        labels.append(label)
    xlabel, ylabel = _AXES[spec.figure]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()

    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    suffix = spec.out_path.suffix.lower()
    if suffix == ".svg":
        fig.savefig(spec.out_path, format="svg", metadata={"Date": None})
    else:
        fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)
    return RenderResult(path=spec.out_path, series_labels=labels, warnings=warnings)


def render_from_results(
    figure: str, results_dir: str | Path, out_path: str | Path, smooth: int = 1
) -> RenderResult:
    runs = discover_runs(results_dir)
    if not runs:
        raise NoInputData(f"no run summaries under {results_dir}")
    spec = FigureSpec(
        figure=figure, csv_paths=runs, out_path=Path(out_path), smooth=smooth
    )
    return render(spec)
