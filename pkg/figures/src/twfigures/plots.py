"""Deterministic figure rendering from observable CSVs.

Line plots carry a shaded +-1 standard-error band per curve; steering
product plots draw the bound Pi V = 1, Duan-Simon plots the bound 4.
Output bytes depend only on the input CSV and the spec: fixed style, fixed
SVG hash salt, no timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .reader import Series, SeriesKey, read_angles, read_observables

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

# reference line drawn automatically per observable kind
_BOUNDS = {"pi_v": 1.0, "duan_simon": 4.0}

_AXIS_LABELS = {
    "pi_v": "product of inferred variances",
    "duan_simon": "Duan-Simon sum",
    "kappa3": "third-order cumulant",
    "kappa4_simple": "fourth-order cumulant",
    "kappa4_standard": "fourth-order cumulant",
    "population": "mean atom number",
}


class MissingObservable(ValueError):
    """The requested observable is absent from the CSV."""


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: input CSVs, an observable filter, labels, output path."""

    csv_paths: tuple[str, ...]
    observables: tuple[str, ...]
    out_path: str
    title: str = ""
    ylabel: str = ""
    reference_lines: tuple[float, ...] = ()
    logy: bool = False


def _deterministic_rc():
    plt.rcdefaults()
    plt.rcParams["svg.hashsalt"] = "twfigures"
    plt.rcParams["figure.figsize"] = (6.4, 4.0)
    plt.rcParams["figure.dpi"] = 120
    plt.rcParams["savefig.dpi"] = 120
    plt.rcParams["font.size"] = 10


def _save(fig, out_path: str) -> None:
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kind = path.suffix.lower().lstrip(".")
    if kind not in ("png", "svg"):
        raise ValueError(f"unsupported output format {kind!r} (use .png or .svg)")
    metadata = {"Date": None} if kind == "svg" else {"Software": "twfigures"}
    fig.savefig(path, format=kind, metadata=metadata)
    plt.close(fig)


def _select(series: dict[SeriesKey, Series], observables: tuple[str, ...]):
    picked = [s for key, s in sorted(series.items(), key=lambda kv: (
        kv[0].observable, kv[0].well_i, kv[0].well_j, kv[0].theta_i, kv[0].theta_j,
    )) if key.observable in observables]
    if not picked:
        raise MissingObservable(
            f"no series matching {observables}; file has "
            f"{sorted({k.observable for k in series})}"
        )
    return picked


def plot_series(spec: PlotSpec) -> str:
    """Render time-series curves with error bands; returns the output path."""
    if not spec.observables:
        raise MissingObservable("empty observable filter")
    _deterministic_rc()
    picked: list[Series] = []
    for csv in spec.csv_paths:
        _, series = read_observables(csv)
        chunk = _select(series, spec.observables)
        prefix = f"{Path(csv).stem}: " if len(spec.csv_paths) > 1 else ""
        for s in chunk:
            picked.append((prefix, s))

    fig, ax = plt.subplots()
    for color, (prefix, s) in zip(_COLORS * 4, picked):
        ax.plot(s.times, s.values, color=color, lw=1.4, label=prefix + s.key.label())
        ax.fill_between(
            s.times, s.values - s.stderrs, s.values + s.stderrs,
            color=color, alpha=0.25, lw=0,
        )
    bounds = set(spec.reference_lines)
    bounds.update(_BOUNDS[o] for o in spec.observables if o in _BOUNDS)
    for b in sorted(bounds):
        ax.axhline(b, color="0.25", ls="--", lw=1.0)
    ax.set_xlabel("Jt")
    ax.set_ylabel(spec.ylabel or _AXIS_LABELS.get(spec.observables[0], spec.observables[0]))
    if spec.title:
        ax.set_title(spec.title)
    if spec.logy:
        ax.set_yscale("log")
    ax.legend(frameon=False, fontsize=9)
    _save(fig, spec.out_path)
    return spec.out_path


def plot_angle_landscape(angles_csv: str, out_path: str, title: str = "") -> str:
    """Render a Pi V angle landscape heatmap with the minimum marked."""
    _deterministic_rc()
    land = read_angles(angles_csv)
    fig, ax = plt.subplots()
    mesh = ax.pcolormesh(
        land.thetas_j, land.thetas_i, land.values, shading="nearest", cmap="viridis"
    )
    fig.colorbar(mesh, ax=ax, label="product of inferred variances")
    i, j = divmod(int(land.values.argmin()), land.values.shape[1])
    ax.plot([land.thetas_j[j]], [land.thetas_i[i]], marker="*", ms=12,
            color="#d62728", mec="white")
    ax.annotate(
        f"min {land.values[i, j]:.4f}",
        (land.thetas_j[j], land.thetas_i[i]),
        textcoords="offset points", xytext=(8, 8), color="white", fontsize=9,
    )
    ax.set_xlabel("theta_j (rad)")
    ax.set_ylabel("theta_i (rad)")
    if title:
        ax.set_title(title)
    _save(fig, out_path)
    return out_path
