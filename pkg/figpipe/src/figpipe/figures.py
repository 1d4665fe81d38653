"""Rebuild experiment figures from persisted harness CSV files.

Four figure kinds cover the simulation write-ups:

* ``curves``               - mean regret and mean unsafe-play count versus
  round, one line per agent CSV.
* ``boxplot``              - final-round spread per agent; regret boxes use
  the full five-number summary, unsafe boxes the recorded quartiles.
* ``sweep-scatter``        - a final-round metric against the swept
  parameter, one series per agent in the sweep table.
* ``inverse-sqrt-scatter`` - mean reciprocal square-root of final regret
  against the swept parameter, exposing inverse-quadratic trends.

Rendering never resamples or smooths: plotted coordinates are exactly the
CSV columns.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["FigureSpec", "render", "read_series_csv", "read_sweep_csv"]

FIGURE_KINDS = ("curves", "boxplot", "sweep-scatter", "inverse-sqrt-scatter")

SERIES_COLUMNS = (
    "t",
    "regret_mean",
    "regret_median",
    "regret_q1",
    "regret_q3",
    "regret_min",
    "regret_max",
    "unsafe_mean",
    "unsafe_median",
    "unsafe_q1",
    "unsafe_q3",
    "violation_mean",
)

SWEEP_COLUMNS = (
    "param",
    "agent",
    "regret_mean",
    "regret_median",
    "unsafe_mean",
    "unsafe_median",
    "violation_mean",
    "invsqrt_regret_mean",
)


@dataclass(frozen=True)
class FigureSpec:
    """What to draw, from which files, to which image."""

    kind: str
    inputs: tuple[str, ...]
    output: str
    labels: tuple[str, ...] = ()
    title: str = ""
    y_column: str = ""  # sweep-scatter metric, default regret_median
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected {FIGURE_KINDS}")
        if not self.inputs:
            raise ValueError("figure needs at least one input file")
        if self.labels and len(self.labels) != len(self.inputs):
            raise ValueError("labels must match inputs one to one")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_dict(cls, data: dict) -> "FigureSpec":
        known = {"kind", "inputs", "output", "labels", "title", "y_column", "options"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown figure spec fields: {sorted(unknown)}")
        for required in ("kind", "inputs", "output"):
            if required not in data:
                raise ValueError(f"figure spec is missing '{required}'")
        return cls(
            kind=data["kind"],
            inputs=tuple(data["inputs"]),
            output=data["output"],
            labels=tuple(data.get("labels", ())),
            title=data.get("title", ""),
            y_column=data.get("y_column", ""),
            options=data.get("options", {}),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "FigureSpec":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def input_labels(self) -> tuple[str, ...]:
        if self.labels:
            return self.labels
        return tuple(Path(p).stem for p in self.inputs)


def _read_csv_columns(path: str | Path, expected: tuple[str, ...], numeric: set[str]):
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        if tuple(header) != expected:
            raise ValueError(
                f"{path}: header {header} does not match the expected schema {list(expected)}"
            )
        columns: dict[str, list] = {name: [] for name in expected}
        for row in reader:
            if len(row) != len(expected):
                raise ValueError(f"{path}: ragged row {row}")
            for name, cell in zip(expected, row):
                columns[name].append(float(cell) if name in numeric else cell)
    return columns


def read_series_csv(path: str | Path) -> dict[str, list[float]]:
    """Load one agent's aggregate series, validating the schema."""
    return _read_csv_columns(path, SERIES_COLUMNS, set(SERIES_COLUMNS))


def read_sweep_csv(path: str | Path) -> dict[str, list]:
    """Load a sweep table; ``param`` stays textual until plotted."""
    numeric = set(SWEEP_COLUMNS) - {"param", "agent"}
    return _read_csv_columns(path, SWEEP_COLUMNS, numeric)


def _curves(spec: FigureSpec):
    fig, (ax_regret, ax_unsafe) = plt.subplots(1, 2, figsize=(10, 4))
    for path, label in zip(spec.inputs, spec.input_labels()):
        series = read_series_csv(path)
        ax_regret.plot(series["t"], series["regret_mean"], label=label)
        ax_unsafe.plot(series["t"], series["unsafe_mean"], label=label)
    ax_regret.set_xlabel("round")
    ax_regret.set_ylabel("mean regret")
    ax_unsafe.set_xlabel("round")
    ax_unsafe.set_ylabel("mean unsafe plays")
    ax_regret.legend()
    ax_unsafe.legend()
    return fig


def _boxplot(spec: FigureSpec):
    fig, (ax_regret, ax_unsafe) = plt.subplots(1, 2, figsize=(10, 4))
    regret_stats = []
    unsafe_stats = []
    for path, label in zip(spec.inputs, spec.input_labels()):
        series = read_series_csv(path)
        regret_stats.append(
            {
                "label": label,
                "med": series["regret_median"][-1],
                "q1": series["regret_q1"][-1],
                "q3": series["regret_q3"][-1],
                "whislo": series["regret_min"][-1],
                "whishi": series["regret_max"][-1],
            }
        )
        # the schema stores no extremes for unsafe counts; whiskers sit on
        # the quartiles
        unsafe_stats.append(
            {
                "label": label,
                "med": series["unsafe_median"][-1],
                "q1": series["unsafe_q1"][-1],
                "q3": series["unsafe_q3"][-1],
                "whislo": series["unsafe_q1"][-1],
                "whishi": series["unsafe_q3"][-1],
            }
        )
    ax_regret.bxp(regret_stats, showfliers=False)
    ax_regret.set_ylabel("final regret")
    ax_unsafe.bxp(unsafe_stats, showfliers=False)
    ax_unsafe.set_ylabel("final unsafe plays")
    return fig


def _param_values(raw: list) -> list[float]:
    try:
        return [float(v) for v in raw]
    except (TypeError, ValueError):
        raise ValueError(
            "sweep parameter values are not numeric; scatter figures need a numeric grid"
        ) from None


def _scatter(spec: FigureSpec, y_column: str, y_label: str):
    if len(spec.inputs) != 1:
        raise ValueError("scatter figures read exactly one sweep CSV")
    table = read_sweep_csv(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6, 4))
    agents = sorted(set(table["agent"]))
    for agent in agents:
        rows = [k for k, a in enumerate(table["agent"]) if a == agent]
        xs = _param_values([table["param"][k] for k in rows])
        ys = [table[y_column][k] for k in rows]
        ax.scatter(xs, ys, label=agent)
    ax.set_xlabel("swept parameter")
    ax.set_ylabel(y_label)
    ax.legend()
    return fig


def render(spec: FigureSpec):
    """Draw the figure and write it to ``spec.output``; returns the figure."""
    for path in spec.inputs:
        if not Path(path).exists():
            raise ValueError(f"input file {path} does not exist")
    if spec.kind == "curves":
        fig = _curves(spec)
    elif spec.kind == "boxplot":
        fig = _boxplot(spec)
    elif spec.kind == "sweep-scatter":
        fig = _scatter(spec, spec.y_column or "regret_median", "final regret")
    else:
        fig = _scatter(
            spec, spec.y_column or "invsqrt_regret_mean", "mean 1/sqrt(final regret)"
        )
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    return fig
