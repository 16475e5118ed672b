"""Learning-curve SVGs rendered with matplotlib.

Output is byte-stable: the SVG id salt is fixed and the date stamp omitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..trainer import moving_average  # noqa: E402
from .io import read_csv  # noqa: E402


@dataclass(frozen=True)
class SeriesSpec:
    x: str
    y: tuple[str, ...]
    window: int = 1

    @classmethod
    def parse(cls, text: str) -> "SeriesSpec":
        """``x:y1,y2[@window]``, e.g. ``episode:reward@100``."""
        body, _, win = text.partition("@")
        x, sep, ys = body.partition(":")
        if not sep or not ys:
            raise ValueError(f"series spec {text!r} is not of the form x:y1,y2[@window]")
        window = int(win) if win else 1
        if window < 1:
            raise ValueError("smoothing window must be positive")
        return cls(x.strip(), tuple(y.strip() for y in ys.split(",")), window)


@dataclass(frozen=True)
class PlotInfo:
    path: Path
    ylim: tuple[float, float]
    series: dict


def smooth(values, window: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return v if window <= 1 else moving_average(v, window)


def emit_plot(csv_path, spec: SeriesSpec | str, out_path=None, title: str | None = None) -> PlotInfo:
    if isinstance(spec, str):
        spec = SeriesSpec.parse(spec)
    schema, cols = read_csv(csv_path)
    missing = [c for c in (spec.x, *spec.y) if c not in cols]
    if missing:
        raise KeyError(f"{csv_path}: no column(s) {', '.join(missing)}")
    out_path = Path(out_path) if out_path else Path(csv_path).with_suffix(".svg")
    x = np.asarray(cols[spec.x], dtype=np.float64)
    series = {y: smooth(cols[y], spec.window) for y in spec.y}

    plt.rcParams["svg.hashsalt"] = "agelab"
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, y in series.items():
        label = name if spec.window <= 1 else f"{name} ({spec.window}-pt mean)"
        ax.plot(x, y, label=label, linewidth=1.2)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(", ".join(spec.y))
    ax.set_title(title or f"{Path(csv_path).stem} [{schema}]")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    ylim = tuple(float(v) for v in ax.get_ylim())
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return PlotInfo(out_path, ylim, series)
