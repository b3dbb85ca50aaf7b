"""Readers for the twdimer observable and angle-landscape CSV schemas.

Only the public CSV contract is used here; this package never imports the
simulation code, so plots can be regenerated from archived CSVs alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

OBSERVABLE_COLUMNS = (
    "time",
    "source",
    "observable",
    "well_i",
    "well_j",
    "theta_i",
    "theta_j",
    "value",
    "stderr",
    "n_used",
)


class SchemaError(ValueError):
    """File is not a twdimer observable/angles CSV."""


@dataclass(frozen=True)
class SeriesKey:
    observable: str
    well_i: str
    well_j: str
    theta_i: str
    theta_j: str

    def label(self) -> str:
        if self.observable == "pi_v":
            return f"infer well {self.well_i} from well {self.well_j}"
        if self.observable == "duan_simon":
            return "Duan-Simon sum"
        if self.well_i:
            return f"well {self.well_i}"
        return self.observable


@dataclass
class Series:
    key: SeriesKey
    times: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray


def read_observables(path: str | Path) -> tuple[list[str], dict[SeriesKey, Series]]:
    """Parse an observable CSV into meta lines and series keyed by identity."""
    meta: list[str] = []
    header: list[str] | None = None
    rows: dict[SeriesKey, list[tuple[float, float, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                meta.append(line[1:].strip())
                continue
            if not line:
                continue
            parts = line.split(",")
            if header is None:
                header = parts
                if tuple(header) != OBSERVABLE_COLUMNS:
                    raise SchemaError(f"{path}: unexpected columns {header}")
                continue
            row = dict(zip(header, parts))
            key = SeriesKey(
                row["observable"], row["well_i"], row["well_j"],
                row["theta_i"], row["theta_j"],
            )
            rows.setdefault(key, []).append(
                (float(row["time"]), float(row["value"]), float(row["stderr"]))
            )
    if header is None:
        raise SchemaError(f"{path}: no header row")
    out: dict[SeriesKey, Series] = {}
    for key, triples in rows.items():
        triples.sort(key=lambda t: t[0])
        arr = np.asarray(triples, dtype=float)
        out[key] = Series(key, arr[:, 0], arr[:, 1], arr[:, 2])
    return meta, out


@dataclass
class AngleLandscape:
    thetas_i: np.ndarray
    thetas_j: np.ndarray
    values: np.ndarray  # (len(thetas_i), len(thetas_j))
    meta: list[str]


def read_angles(path: str | Path) -> AngleLandscape:
    """Parse an angle-landscape CSV (theta_i, theta_j, pi_v grid dump)."""
    meta: list[str] = []
    ti: list[float] = []
    tj: list[float] = []
    vals: list[float] = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                meta.append(line[1:].strip())
                continue
            if not line:
                continue
            if header is None:
                header = line.split(",")
                if header != ["theta_i", "theta_j", "pi_v"]:
                    raise SchemaError(f"{path}: unexpected columns {header}")
                continue
            a, b, v = line.split(",")
            ti.append(float(a))
            tj.append(float(b))
            vals.append(float(v))
    if header is None or not vals:
        raise SchemaError(f"{path}: empty angle landscape")
    thetas_i = np.unique(ti)
    thetas_j = np.unique(tj)
    grid = np.full((len(thetas_i), len(thetas_j)), np.nan)
    ii = np.searchsorted(thetas_i, ti)
    jj = np.searchsorted(thetas_j, tj)
    grid[ii, jj] = vals
    if np.any(np.isnan(grid)):
        raise SchemaError(f"{path}: angle grid is not complete")
    return AngleLandscape(thetas_i, thetas_j, grid, meta)
