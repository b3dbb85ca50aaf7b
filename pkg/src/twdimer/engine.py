"""Ensemble integration of the dimer SDEs with deterministic parallel reduction.

Trajectories are embarrassingly parallel; moments are reduced per batch in a
fixed trajectory order, so every result is a pure function of (params, grid)
including the master seed, for any worker count.  Batches are contiguous
trajectory ranges; standard errors come from the spread of per-batch means.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import DimerParams, Topology, WignerState


def _kernels():
    # deferred so the CLI can pin NUMBA_NUM_THREADS before numba initializes
    from . import _kernels as mod

    return mod

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

#: Exponent table (p, q, r, s) of every stored monomial
#: alpha1^p conj(alpha1)^q alpha2^r conj(alpha2)^s with p+q+r+s <= 4,
#: in lexicographic order (70 entries).
MOMENT_EXPONENTS: np.ndarray = np.array(
    [e for e in itertools.product(range(5), repeat=4) if sum(e) <= 4],
    dtype=np.int64,
)

#: Lookup from exponent tuple to row index in MOMENT_EXPONENTS.
MOMENT_INDEX: dict[tuple[int, int, int, int], int] = {
    tuple(int(x) for x in e): i for i, e in enumerate(MOMENT_EXPONENTS)
}


class Diverged(RuntimeError):
    """A single trajectory tripped the |alpha| overflow guard."""


class TooManyDivergences(RuntimeError):
    """More than 0.1% of trajectories diverged; dt is too large or chi too strong."""


class ShapeMismatch(ValueError):
    """Accumulators disagree on save times or moment basis."""


class CheckpointMismatch(RuntimeError):
    """Checkpoint on disk does not belong to the requested run."""


@dataclass(frozen=True)
class SimGrid:
    """Discretization and ensemble layout of one run.

    save_times must be (close to) integer multiples of dt.  noise_subdiv
    splits each step's noise increment into that many counter-addressed
    sub-draws; runs at (dt, 2k) and (dt/2, k) then share one Wiener path,
    which is what the step-halving convergence check uses.
    """

    dt: float
    t_final: float
    save_times: tuple[float, ...]
    n_traj: int
    n_batches: int = 100
    master_seed: int = 0
    noise_subdiv: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.save_times:
            raise ValueError("save_times must be non-empty")
        if list(self.save_times) != sorted(set(self.save_times)):
            raise ValueError("save_times must be strictly increasing")
        if self.t_final < max(self.save_times) - 0.5 * self.dt:
            raise ValueError("t_final must cover every save time")
        if not (self.n_traj >= self.n_batches >= 2):
            raise ValueError(
                f"need n_traj >= n_batches >= 2, got {self.n_traj}, {self.n_batches}"
            )
        if self.noise_subdiv < 1:
            raise ValueError("noise_subdiv must be >= 1")
        if not (0 <= self.master_seed < 2**64):
            raise ValueError("master_seed must fit in 64 bits")
        for t in self.save_times:
            steps = round(t / self.dt)
            if abs(t - steps * self.dt) > 0.5 * self.dt * (1 + 1e-9):
                raise ValueError(f"save time {t} is not within dt/2 of a step multiple")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def save_steps(self) -> np.ndarray:
        return np.array([round(t / self.dt) for t in self.save_times], dtype=np.int64)

    @property
    def batch_bounds(self) -> np.ndarray:
        return np.array(
            [i * self.n_traj // self.n_batches for i in range(self.n_batches + 1)],
            dtype=np.int64,
        )


@dataclass(frozen=True)
class TrajectoryOutcome:
    """States of one trajectory at every save time, plus the divergence flag."""

    states: np.ndarray  # (n_save, 2) complex128
    diverged: bool


@dataclass
class MomentAccumulator:
    """Mergeable per-batch sums of all mixed moments up to total degree 4.

    sums[b, t, m] is the sum over batch b's non-diverged trajectories of
    monomial m (see MOMENT_EXPONENTS) at save time t.
    """

    save_times: np.ndarray  # (n_save,)
    sums: np.ndarray  # (n_batches, n_save, n_mono) complex128
    n_used: np.ndarray  # (n_batches,) int64
    n_diverged: np.ndarray  # (n_batches,) int64
    exponents: np.ndarray = field(default_factory=lambda: MOMENT_EXPONENTS.copy())

    @property
    def n_batches(self) -> int:
        return self.sums.shape[0]

    @property
    def n_total_used(self) -> int:
        return int(self.n_used.sum())

    @property
    def n_total_diverged(self) -> int:
        return int(self.n_diverged.sum())

    def pooled_means(self) -> np.ndarray:
        """(n_save, n_mono) ensemble means over all batches."""
        return self.sums.sum(axis=0) / self.n_total_used

    def batch_means(self) -> np.ndarray:
        """(n_batches, n_save, n_mono) per-batch means."""
        return self.sums / self.n_used[:, None, None]

    def moment(self, exponent: tuple[int, int, int, int]) -> np.ndarray:
        """Pooled mean of one monomial over time, by exponent tuple."""
        return self.pooled_means()[:, MOMENT_INDEX[exponent]]

    @classmethod
    def empty(cls, save_times: np.ndarray) -> "MomentAccumulator":
        n_save = len(save_times)
        return cls(
            save_times=np.asarray(save_times, dtype=np.float64),
            sums=np.zeros((0, n_save, len(MOMENT_EXPONENTS)), dtype=np.complex128),
            n_used=np.zeros(0, dtype=np.int64),
            n_diverged=np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def from_states(
        cls, states: np.ndarray, save_times: np.ndarray, n_batches: int
    ) -> "MomentAccumulator":
        """Build an accumulator from explicit states (n_traj, n_save, 2).

        Test and demo utility; batches are contiguous trajectory blocks.
        """
        states = np.asarray(states, dtype=np.complex128)
        n_traj = states.shape[0]
        n_save = states.shape[1]
        bounds = [i * n_traj // n_batches for i in range(n_batches + 1)]
        sums = np.zeros((n_batches, n_save, len(MOMENT_EXPONENTS)), dtype=np.complex128)
        a1 = states[:, :, 0]
        a2 = states[:, :, 1]
        monos = np.empty((n_traj, n_save, len(MOMENT_EXPONENTS)), dtype=np.complex128)
        for m, (p, q, r, s) in enumerate(MOMENT_EXPONENTS):
            monos[:, :, m] = a1**p * np.conj(a1) ** q * a2**r * np.conj(a2) ** s
        for b in range(n_batches):
            sums[b] = monos[bounds[b] : bounds[b + 1]].sum(axis=0)
        return cls(
            save_times=np.asarray(save_times, dtype=np.float64),
            sums=sums,
            n_used=np.diff(np.array(bounds, dtype=np.int64)),
            n_diverged=np.zeros(n_batches, dtype=np.int64),
        )

    @classmethod
    def from_moments(
        cls, means: np.ndarray, save_times: np.ndarray, n_batches: int = 2, n_per_batch: int = 1
    ) -> "MomentAccumulator":
        """Build a synthetic accumulator whose every batch mean equals `means`.

        means has shape (n_save, n_mono); useful for feeding analytic moment
        sets (Gaussian, Fock, ...) through the statistics pipeline.
        """
        means = np.asarray(means, dtype=np.complex128)
        sums = np.repeat(means[None, :, :] * n_per_batch, n_batches, axis=0)
        return cls(
            save_times=np.asarray(save_times, dtype=np.float64),
            sums=sums,
            n_used=np.full(n_batches, n_per_batch, dtype=np.int64),
            n_diverged=np.zeros(n_batches, dtype=np.int64),
        )


def _kernel_args(params: DimerParams, grid: SimGrid, with_noise: bool, initial_state):
    g1, g2 = params.damping_rates
    noise_well = params.damped_well
    noise_amp = np.sqrt(params.loss_rate) if with_noise else 0.0
    if initial_state is None:
        init_mode, ia1, ia2 = 0, 0.0j, 0.0j
    else:
        init_mode = 1
        ia1 = complex(initial_state.alpha1)
        ia2 = complex(initial_state.alpha2)
    seed = int(grid.master_seed)
    seed_lo = np.uint64(seed & 0xFFFFFFFF)
    seed_hi = np.uint64((seed >> 32) & 0xFFFFFFFF)
    return (
        seed_lo,
        seed_hi,
        params.chi,
        params.kerr_shift,
        params.tunneling,
        params.pump_rate,
        g1,
        g2,
        noise_well,
        noise_amp,
        grid.dt,
        grid.n_steps,
        grid.noise_subdiv,
        grid.save_steps,
        init_mode,
        ia1,
        ia2,
    )


def integrate_trajectory(
    params: DimerParams,
    grid: SimGrid,
    traj_index: int,
    *,
    with_noise: bool = True,
    initial_state: WignerState | None = None,
) -> TrajectoryOutcome:
    """Integrate a single trajectory of the ensemble.

    The result is bit-identical to the same trajectory inside run_ensemble:
    all randomness is addressed by (master_seed, traj_index, step).
    """
    if not (0 <= traj_index < grid.n_traj):
        raise ValueError(f"traj_index {traj_index} outside [0, {grid.n_traj})")
    (seed_lo, seed_hi, chi, ks, tun, eps, g1, g2, nw, na, dt, n_steps, subdiv,
     save_steps, init_mode, ia1, ia2) = _kernel_args(params, grid, with_noise, initial_state)
    states, div = _kernels()._run_single(
        seed_lo, seed_hi, traj_index, chi, ks, tun, eps, g1, g2, nw, na,
        dt, n_steps, subdiv, save_steps, init_mode, ia1, ia2,
    )
    return TrajectoryOutcome(states=states, diverged=bool(div))


def run_batch_range(
    params: DimerParams,
    grid: SimGrid,
    batch_lo: int,
    batch_hi: int,
    *,
    with_noise: bool = True,
    initial_state: WignerState | None = None,
) -> MomentAccumulator:
    """Run a contiguous range of the grid's batches (checkpointing building block)."""
    bounds = grid.batch_bounds
    sub_bounds = bounds[batch_lo : batch_hi + 1].copy()
    n_batches = batch_hi - batch_lo
    n_save = len(grid.save_times)
    sums = np.zeros((n_batches, n_save, len(MOMENT_EXPONENTS)), dtype=np.complex128)
    used = np.zeros(n_batches, dtype=np.int64)
    diverged = np.zeros(n_batches, dtype=np.int64)
    (seed_lo, seed_hi, chi, ks, tun, eps, g1, g2, nw, na, dt, n_steps, subdiv,
     save_steps, init_mode, ia1, ia2) = _kernel_args(params, grid, with_noise, initial_state)
    _kernels()._run_batches(
        seed_lo, seed_hi, 0, sub_bounds, chi, ks, tun, eps, g1, g2, nw, na,
        dt, n_steps, subdiv, save_steps, MOMENT_EXPONENTS,
        init_mode, ia1, ia2, sums, used, diverged,
    )
    return MomentAccumulator(
        save_times=np.asarray(grid.save_times, dtype=np.float64),
        sums=sums,
        n_used=used,
        n_diverged=diverged,
    )


def run_ensemble(
    params: DimerParams,
    grid: SimGrid,
    *,
    with_noise: bool = True,
    initial_state: WignerState | None = None,
    checkpoint_path: str | None = None,
    checkpoint_every: int = 25,
    config_echo: str = "",
) -> MomentAccumulator:
    """Integrate the whole ensemble and reduce it into a MomentAccumulator.

    With checkpoint_path set, per-batch results are persisted every
    checkpoint_every batches and an existing compatible checkpoint is
    resumed; the final result is bit-identical to an uninterrupted run.

    Raises TooManyDivergences when more than 0.1% of trajectories tripped
    the overflow guard.
    """
    done = 0
    parts: list[MomentAccumulator] = []
    if checkpoint_path is not None:
        resumed = try_load_checkpoint(checkpoint_path, grid, config_echo)
        if resumed is not None:
            acc, done = resumed
            if done > 0:
                parts.append(acc)
                logger.info("resumed from checkpoint at batch %d/%d", done, grid.n_batches)

    while done < grid.n_batches:
        hi = grid.n_batches if checkpoint_path is None else min(done + checkpoint_every, grid.n_batches)
        parts.append(
            run_batch_range(
                params, grid, done, hi,
                with_noise=with_noise, initial_state=initial_state,
            )
        )
        done = hi
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, _concat(parts), grid, config_echo, done)
        logger.info("completed %d/%d batches", done, grid.n_batches)

    acc = _concat(parts)
    if acc.n_total_diverged > 0.001 * grid.n_traj:
        raise TooManyDivergences(
            f"{acc.n_total_diverged} of {grid.n_traj} trajectories diverged"
        )
    if acc.n_total_used + acc.n_total_diverged != grid.n_traj:
        raise AssertionError("trajectory accounting broke: used + diverged != n_traj")
    return acc


def _concat(parts: list[MomentAccumulator]) -> MomentAccumulator:
    acc = parts[0]
    for p in parts[1:]:
        acc = merge(acc, p)
    return acc


def merge(acc_a: MomentAccumulator, acc_b: MomentAccumulator) -> MomentAccumulator:
    """Concatenate two accumulators' batch lists (raw sums are kept exact).

    Requires identical save times and moment basis; counts add.
    """
    if acc_a.save_times.shape != acc_b.save_times.shape or not np.array_equal(
        acc_a.save_times, acc_b.save_times
    ):
        raise ShapeMismatch("save_times differ")
    if not np.array_equal(acc_a.exponents, acc_b.exponents):
        raise ShapeMismatch("moment bases differ")
    return MomentAccumulator(
        save_times=acc_a.save_times.copy(),
        sums=np.concatenate([acc_a.sums, acc_b.sums], axis=0),
        n_used=np.concatenate([acc_a.n_used, acc_b.n_used]),
        n_diverged=np.concatenate([acc_a.n_diverged, acc_b.n_diverged]),
    )


# -- checkpointing ----------------------------------------------------------

def _grid_fingerprint(grid: SimGrid) -> np.ndarray:
    return np.array(
        [grid.dt, grid.t_final, float(grid.n_traj), float(grid.n_batches),
         float(grid.master_seed), float(grid.noise_subdiv)],
        dtype="<f8",
    )


def save_checkpoint(
    path: str, acc: MomentAccumulator, grid: SimGrid, config_echo: str, batches_done: int
) -> None:
    """Persist partial per-batch sums plus enough metadata to resume exactly.

    All arrays are stored little-endian; RNG progress is just batches_done
    because every draw is counter-addressed.
    """
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(
            fh,
            version=np.int64(CHECKPOINT_VERSION),
            config_echo=np.frombuffer(config_echo.encode("utf-8"), dtype="<u1"),
            grid_fp=_grid_fingerprint(grid),
            save_times=np.asarray(grid.save_times, dtype="<f8"),
            exponents=MOMENT_EXPONENTS.astype("<i8"),
            batches_done=np.int64(batches_done),
            sums=acc.sums.astype("<c16"),
            n_used=acc.n_used.astype("<i8"),
            n_diverged=acc.n_diverged.astype("<i8"),
        )
    import os

    os.replace(tmp, path)


def load_checkpoint(path: str) -> dict:
    with np.load(path) as z:
        data = {k: z[k] for k in z.files}
    if int(data["version"]) != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"unsupported checkpoint version {int(data['version'])}")
    return data


def accumulator_from_checkpoint(path: str) -> MomentAccumulator:
    """Rehydrate the accumulator stored in a checkpoint (native byte order)."""
    data = load_checkpoint(path)
    return MomentAccumulator(
        save_times=np.ascontiguousarray(data["save_times"], dtype=np.float64),
        sums=np.ascontiguousarray(data["sums"], dtype=np.complex128),
        n_used=np.ascontiguousarray(data["n_used"], dtype=np.int64),
        n_diverged=np.ascontiguousarray(data["n_diverged"], dtype=np.int64),
    )


def try_load_checkpoint(
    path: str, grid: SimGrid, config_echo: str
) -> tuple[MomentAccumulator, int] | None:
    """Load a checkpoint for resuming, or None when the file does not exist.

    Raises CheckpointMismatch when the file belongs to a different run.
    """
    import os

    if not os.path.exists(path):
        return None
    data = load_checkpoint(path)
    stored_echo = bytes(data["config_echo"].tobytes()).decode("utf-8")
    if stored_echo != config_echo:
        raise CheckpointMismatch("checkpoint was written by a different configuration")
    if not np.allclose(data["grid_fp"], _grid_fingerprint(grid), rtol=0, atol=0):
        raise CheckpointMismatch("checkpoint grid does not match the requested grid")
    if not np.array_equal(
        np.asarray(data["save_times"], dtype=np.float64),
        np.asarray(grid.save_times, dtype=np.float64),
    ):
        raise CheckpointMismatch("checkpoint save times do not match")
    acc = accumulator_from_checkpoint(path)
    return acc, int(data["batches_done"])
