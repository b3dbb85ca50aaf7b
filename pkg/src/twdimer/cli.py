"""Command-line experiment runner.

Subcommands: run, sweep, oracle, compare, angles.
Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 tolerance failure.

Engine imports are deferred until after --threads is handled, because the
worker count must be pinned before numba initializes its thread pool.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
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

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TOLERANCE = 4


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, meta_lines: list[str], rows: list[tuple]) -> None:
    """Write the observable CSV; output is byte-deterministic for a given run."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# twdimer-csv v1\n")
        fh.write(f"# code_version = {__version__}\n")
        for line in meta_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: Path) -> tuple[list[str], list[dict]]:
    """Read an observable CSV back into (meta lines, row dicts)."""
    meta: list[str] = []
    rows: list[dict] = []
    header: list[str] | None = None
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
                if tuple(header) != CSV_COLUMNS:
                    raise SchemaMismatch(f"{path}: unexpected columns {header}")
                continue
            rows.append(dict(zip(header, parts)))
    if header is None:
        raise SchemaMismatch(f"{path}: no header row")
    return meta, rows


class SchemaMismatch(ValueError):
    """CSV does not follow the observable schema."""


def _series_rows(series, source: str) -> list[tuple]:
    wells = list(series.wells) + ["", ""]
    thetas = list(series.thetas) + ["", ""]
    n_used = series.n_used if series.n_used else ""
    return [
        (
            _fmt(float(t)),
            source,
            series.kind,
            _fmt(wells[0]),
            _fmt(wells[1]),
            _fmt(thetas[0]),
            _fmt(thetas[1]),
            _fmt(float(v)),
            _fmt(float(se)),
            _fmt(n_used),
        )
        for t, v, se in zip(series.times, series.values, series.stderrs)
    ]


def engine_series(cfg: RunConfig, acc) -> list:
    """All observable series requested by the configuration."""
    from . import statistics as st

    out = []
    th = cfg.kappa_theta
    for name in cfg.observables:
        if name == "means":
            for w in (1, 2):
                for part in ("re", "im"):
                    out.append(st.mean_amplitude(acc, w, part))
        elif name == "populations":
            for w in (1, 2):
                out.append(st.population(acc, w))
        elif name == "variances":
            for w in (1, 2):
                sx = st.quad_variance(acc, st.QuadratureSpec(w, th))
                sx.kind = "var_x"
                sy = st.quad_variance(acc, st.QuadratureSpec(w, th + 0.5 * math.pi))
                sy.kind = "var_y"
                sy.thetas = (th,)
                out.extend([sx, sy])
        elif name == "kappa3":
            for w in (1, 2):
                out.append(st.kappa3(acc, st.QuadratureSpec(w, th)))
        elif name == "kappa4":
            for w in (1, 2):
                out.append(st.kappa4(acc, st.QuadratureSpec(w, th), cfg.kappa_convention))
        elif name == "epr":
            for w in (1, 2):
                opt = st.optimize_epr(acc, w, cfg.epr_grid)
                out.append(st.epr_product(acc, w, opt.theta_i, opt.theta_j))
        elif name == "duan_simon":
            out.append(st.duan_simon(acc, cfg.duan_theta))
    return out


def _config_meta(cfg: RunConfig) -> list[str]:
    lines = ["config follows (verbatim echo)"]
    lines += cfg.to_text().rstrip("\n").splitlines()
    return lines


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg = cfg.replace(seed=args.seed_override)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    from . import engine

    ckpt = out_dir / "checkpoint.npz"
    if not args.resume and ckpt.exists():
        ckpt.unlink()
    acc = engine.run_ensemble(
        cfg.params(),
        cfg.grid(),
        checkpoint_path=str(ckpt),
        checkpoint_every=cfg.checkpoint_every,
        config_echo=cfg.to_text(),
    )
    rows: list[tuple] = []
    for series in engine_series(cfg, acc):
        rows.extend(_series_rows(series, "tw"))
    meta = ["source = tw"] + _config_meta(cfg)
    write_csv(out_dir / "observables.csv", meta, rows)
    print(f"wrote {out_dir / 'observables.csv'} "
          f"({acc.n_total_used} trajectories used, {acc.n_total_diverged} diverged)")
    return EXIT_OK


def _steady_summary_rows(cfg: RunConfig, acc, param: str, value: str) -> list[tuple]:
    from . import statistics as st

    rows = []
    for series in engine_series(cfg, acc):
        sv = st.steady_value(series)
        wells = list(series.wells) + ["", ""]
        thetas = list(series.thetas) + ["", ""]
        rows.append(
            (
                param,
                value,
                series.kind,
                _fmt(wells[0]),
                _fmt(wells[1]),
                _fmt(thetas[0]),
                _fmt(thetas[1]),
                _fmt(sv.value),
                _fmt(sv.stderr),
                str(int(sv.stationary)),
                "0",
            )
        )
    return rows


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg = cfg.replace(seed=args.seed_override)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep requires a non-empty --values list")
    if args.param not in ("chi", "epsilon", "gamma", "topology"):
        raise ConfigError(f"cannot sweep parameter {args.param!r}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    from . import engine

    summary: list[tuple] = []
    failures = 0
    for value in values:
        if args.param == "topology":
            sub = cfg.replace(loss_well=int(value))
        else:
            sub = cfg.replace(**{args.param if args.param != "epsilon" else "epsilon": float(value)})
        sub_dir = out_dir / f"{args.param}={value}"
        sub_dir.mkdir(parents=True, exist_ok=True)
        try:
            acc = engine.run_ensemble(
                sub.params(),
                sub.grid(),
                checkpoint_path=str(sub_dir / "checkpoint.npz"),
                checkpoint_every=sub.checkpoint_every,
                config_echo=sub.to_text(),
            )
            rows = []
            for series in engine_series(sub, acc):
                rows.extend(_series_rows(series, "tw"))
            write_csv(sub_dir / "observables.csv", ["source = tw"] + _config_meta(sub), rows)
            summary.extend(_steady_summary_rows(sub, acc, args.param, value))
        except Exception as exc:  # noqa: BLE001 - sweep keeps going and marks failures
            logger.error("sweep point %s=%s failed: %s", args.param, value, exc)
            failures += 1
            summary.append((args.param, value, "", "", "", "", "", "", "", "", "1"))
    header = (
        "param,value,observable,well_i,well_j,theta_i,theta_j,"
        "steady_value,steady_stderr,stationary,failed"
    )
    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# twdimer-sweep v1\n")
        fh.write(f"# code_version = {__version__}\n")
        fh.write(header + "\n")
        for row in summary:
            fh.write(",".join(row) + "\n")
    print(f"wrote {out_dir / 'summary.csv'} ({failures} failed points)")
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    from . import oracle as orc

    space = orc.FockSpace(cfg.cutoff1, cfg.cutoff2)
    run = orc.evolve(
        orc.vacuum_state(space),
        cfg.params(),
        dt=cfg.oracle_dt,
        t_final=cfg.t_final,
        save_times=cfg.save_times(),
    )
    rows: list[tuple] = []
    th = cfg.kappa_theta
    for t, state in zip(run.times, run.states):
        ex = orc.fock_expectations(state, th, th)
        tf = _fmt(float(t))
        for w in (1, 2):
            amp = ex.amplitudes[w - 1]
            rows.append((tf, "oracle", "mean_re", str(w), "", "", "", _fmt(float(amp.real)), _fmt(0.0), ""))
            rows.append((tf, "oracle", "mean_im", str(w), "", "", "", _fmt(float(amp.imag)), _fmt(0.0), ""))
            rows.append((tf, "oracle", "population", str(w), "", "", "", _fmt(float(ex.populations[w - 1])), _fmt(0.0), ""))
            rows.append((tf, "oracle", "var_x", str(w), "", _fmt(th), "", _fmt(ex.var_x(w)), _fmt(0.0), ""))
            rows.append((tf, "oracle", "var_y", str(w), "", _fmt(th), "", _fmt(ex.var_y(w)), _fmt(0.0), ""))
    meta = ["source = oracle", f"max_boundary_population = {run.max_boundary_population!r}"]
    meta += _config_meta(cfg)
    write_csv(out_dir / "oracle.csv", meta, rows)
    print(f"wrote {out_dir / 'oracle.csv'} (max boundary population "
          f"{run.max_boundary_population:.3e})")
    return EXIT_OK


def _row_key(row: dict) -> tuple:
    return (row["observable"], row["well_i"], row["well_j"], row["theta_i"], row["theta_j"])


def compare_csvs(
    engine_csv: Path, oracle_csv: Path, observables: list[str] | None = None
) -> dict[tuple, float]:
    """Per-observable max |engine - oracle| / max(|oracle|, 0.1) at matched times."""
    _, rows_a = read_csv(engine_csv)
    _, rows_b = read_csv(oracle_csv)

    def index(rows):
        table: dict[tuple, dict[str, float]] = {}
        for r in rows:
            table.setdefault(_row_key(r), {})[r["time"]] = float(r["value"])
        return table

    ta, tb = index(rows_a), index(rows_b)
    common = [k for k in ta if k in tb and (observables is None or k[0] in observables)]
    if not common:
        raise SchemaMismatch("no common observables between the two files")
    report: dict[tuple, float] = {}
    for key in sorted(common):
        times = [t for t in ta[key] if t in tb[key]]
        if not times:
            raise SchemaMismatch(f"no matching times for observable {key}")
        dev = 0.0
        for t in times:
            ref = tb[key][t]
            dev = max(dev, abs(ta[key][t] - ref) / max(abs(ref), 0.1))
        report[key] = dev
    return report


def cmd_compare(args) -> int:
    observables = None
    if args.observables:
        observables = [v.strip() for v in args.observables.split(",") if v.strip()]
    report = compare_csvs(Path(args.engine_csv), Path(args.oracle_csv), observables)
    worst = 0.0
    for key, dev in report.items():
        status = "ok" if dev <= args.tol else "FAIL"
        label = "/".join(x for x in key if x)
        print(f"{label:40s} max_rel_dev = {dev:.6f}  [{status}]")
        worst = max(worst, dev)
    print(f"worst deviation {worst:.6f} vs tolerance {args.tol}")
    return EXIT_OK if worst <= args.tol else EXIT_TOLERANCE


def cmd_angles(args) -> int:
    from . import engine
    from . import statistics as st

    acc = engine.accumulator_from_checkpoint(args.checkpoint)
    times = acc.save_times
    if args.time is None:
        t_index = len(times) - 1
    else:
        t_index = int(min(range(len(times)), key=lambda i: abs(times[i] - args.time)))
    summary = st._second_moment_summary(acc, t_index)
    import numpy as np

    grid = np.arange(args.grid) * (math.pi / args.grid)
    values = st._pi_v_grid(summary, args.inferred_well, grid, grid)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# twdimer-angles v1\n")
        fh.write(f"# code_version = {__version__}\n")
        fh.write(f"# inferred_well = {args.inferred_well}\n")
        fh.write(f"# time = {_fmt(float(times[t_index]))}\n")
        fh.write("theta_i,theta_j,pi_v\n")
        for i in range(args.grid):
            for j in range(args.grid):
                fh.write(f"{_fmt(float(grid[i]))},{_fmt(float(grid[j]))},{_fmt(float(values[i, j]))}\n")
    opt = st.optimize_epr(acc, args.inferred_well, args.grid, t_index)
    print(f"wrote {out}; minimum pi_v = {opt.pi_v!r} at "
          f"(theta_i, theta_j) = ({opt.theta_i!r}, {opt.theta_j!r})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twdimer",
        description="Truncated-Wigner simulator for the pumped and damped Bose-Hubbard dimer",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_resume=False):
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker thread count")
        p.add_argument("--seed-override", type=int, default=None, dest="seed_override")
        if with_resume:
            p.add_argument("--resume", action="store_true", help="resume from checkpoint")

    p_run = sub.add_parser("run", help="run the stochastic ensemble and write observables")
    common(p_run, with_resume=True)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one config across parameter values")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, help="chi | epsilon | gamma | topology")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="exact master-equation run with the same CSV schema")
    common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    p_cmp = sub.add_parser("compare", help="diff two observable CSVs")
    p_cmp.add_argument("engine_csv")
    p_cmp.add_argument("oracle_csv")
    p_cmp.add_argument("--tol", type=float, default=0.05)
    p_cmp.add_argument("--observables", default=None, help="comma-separated filter")
    p_cmp.add_argument("--threads", type=int, default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_ang = sub.add_parser("angles", help="dump the Pi V angle landscape of a saved accumulator")
    p_ang.add_argument("--checkpoint", required=True, help="checkpoint.npz of a finished run")
    p_ang.add_argument("--out", required=True, help="output CSV path")
    p_ang.add_argument("--inferred-well", type=int, default=1, dest="inferred_well", choices=(1, 2))
    p_ang.add_argument("--grid", type=int, default=180)
    p_ang.add_argument("--time", type=float, default=None, help="save time (default: last)")
    p_ang.add_argument("--threads", type=int, default=None)
    p_ang.set_defaults(func=cmd_angles)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    threads = getattr(args, "threads", None)
    if threads is not None:
        # must happen before anything imports numba
        os.environ["NUMBA_NUM_THREADS"] = str(threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # classified below
        from . import engine, oracle

        if isinstance(exc, engine.CheckpointMismatch):
            print(f"checkpoint mismatch: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if isinstance(
            exc, (engine.TooManyDivergences, oracle.CutoffLeak, oracle.Instability)
        ):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        raise


if __name__ == "__main__":
    sys.exit(main())
