"""Plain-text run configuration: `key = value` lines with `#` comments.

The serialized form round-trips losslessly (floats via repr), and the exact
echo is embedded in every CSV header and checkpoint so a run can be
reproduced from its output alone.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .engine import SimGrid
from .model import DimerParams, Topology


class ConfigError(ValueError):
    """Bad configuration file; message carries line/field diagnostics."""


_OBSERVABLE_CHOICES = (
    "means",
    "populations",
    "variances",
    "kappa3",
    "kappa4",
    "epr",
    "duan_simon",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything one reproducible run needs: physics, grid, observables, oracle."""

    # physics (rates in units of the tunneling J; time is dimensionless Jt)
    chi: float = 0.001
    epsilon: float = 10.0
    gamma: float = 1.0
    tunneling: float = 1.0
    loss_well: int = 2
    kerr_shift: float = 1.0
    # ensemble grid
    dt: float = 0.001
    t_final: float = 20.0
    save_interval: float = 0.1
    n_traj: int = 200_000
    n_batches: int = 100
    seed: int = 20260810
    noise_subdiv: int = 1
    checkpoint_every: int = 25
    # observables
    observables: tuple[str, ...] = (
        "means",
        "populations",
        "variances",
        "kappa3",
        "kappa4",
        "epr",
        "duan_simon",
    )
    kappa_theta: float = 0.0
    kappa_convention: str = "simple"
    epr_grid: int = 180
    duan_theta: float = 0.0
    # oracle (exact master-equation runs only)
    cutoff1: int = 14
    cutoff2: int = 14
    oracle_dt: float = 0.002

    def __post_init__(self) -> None:
        if self.loss_well not in (1, 2):
            raise ConfigError(f"loss_well must be 1 or 2, got {self.loss_well}")
        if self.kappa_convention not in ("simple", "standard"):
            raise ConfigError(
                f"kappa_convention must be 'simple' or 'standard', got {self.kappa_convention!r}"
            )
        for name in self.observables:
            if name not in _OBSERVABLE_CHOICES:
                raise ConfigError(
                    f"unknown observable {name!r}; choices: {', '.join(_OBSERVABLE_CHOICES)}"
                )
        if self.epr_grid < 4:
            raise ConfigError("epr_grid must be >= 4")
        if self.save_interval <= 0 or self.t_final <= 0:
            raise ConfigError("save_interval and t_final must be > 0")

    # -- derived objects -----------------------------------------------------

    def params(self) -> DimerParams:
        return DimerParams(
            chi=self.chi,
            tunneling=self.tunneling,
            pump_rate=self.epsilon,
            loss_rate=self.gamma,
            topology=Topology(self.loss_well),
            kerr_shift=self.kerr_shift,
        )

    def save_times(self) -> tuple[float, ...]:
        n = int(round(self.t_final / self.save_interval))
        return tuple(round(k * self.save_interval, 12) for k in range(n + 1))

    def grid(self) -> SimGrid:
        try:
            return SimGrid(
                dt=self.dt,
                t_final=self.t_final,
                save_times=self.save_times(),
                n_traj=self.n_traj,
                n_batches=self.n_batches,
                master_seed=self.seed,
                noise_subdiv=self.noise_subdiv,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- serialization ---------------------------------------------------------

    def to_text(self) -> str:
        lines = [
            "# twdimer run configuration",
            "# rates are in units of the tunneling J; time is the dimensionless Jt",
        ]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                rendered = ", ".join(str(v) for v in value)
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            lines.append(f"{f.name} = {rendered}")
        return "\n".join(lines) + "\n"

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    def replace(self, **changes) -> "RunConfig":
        from dataclasses import replace as dc_replace

        return dc_replace(self, **changes)


def _parse_value(name: str, raw: str, typ, lineno: int):
    try:
        if typ == "float":
            return float(raw)
        if typ == "int":
            return int(raw)
        if typ == "str":
            return raw
        if typ.startswith("tuple"):
            items = [v.strip() for v in raw.split(",") if v.strip()]
            return tuple(items)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: field '{name}': cannot parse {raw!r}") from exc
    raise ConfigError(f"line {lineno}: field '{name}' has unsupported type {typ}")


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; unknown keys and malformed lines are errors."""
    field_types = {f.name: f.type for f in fields(RunConfig)}
    values: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in field_types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, str(field_types[key]), lineno)
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))
