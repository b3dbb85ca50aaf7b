"""Exact master-equation solver on a truncated two-mode Fock space.

Ground truth for validating the stochastic engine at small pump strength.
The generator matches the phase-space model convention exactly: the damping
superoperator gamma(2 a rho a+ - a+a rho - rho a+a) gives amplitude decay
-gamma alpha and population decay exp(-2 gamma t), and the pump enters as a
c-number drive i eps (a1+ - a1), i.e. a classical undepleted reservoir.

The density matrix is dense; the Liouvillian is applied matrix-free by
shifting Fock indices, which avoids ever forming a D^2 x D^2 superoperator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import DimerParams

logger = logging.getLogger(__name__)

MAX_DIM = 4096


class CutoffLeak(RuntimeError):
    """Probability is piling up on the Fock-space boundary; raise the cutoffs."""


class Instability(RuntimeError):
    """Trace or Hermiticity blew up; reduce dt."""


@dataclass(frozen=True)
class FockSpace:
    """Truncated two-mode Fock space with occupations 0..cutoff per well."""

    cutoff1: int
    cutoff2: int

    def __post_init__(self) -> None:
        if self.cutoff1 < 1 or self.cutoff2 < 1:
            raise ValueError("cutoffs must be >= 1")
        if self.dim > MAX_DIM:
            raise ValueError(f"density matrix dimension {self.dim} exceeds {MAX_DIM}")

    @property
    def dims(self) -> tuple[int, int]:
        return (self.cutoff1 + 1, self.cutoff2 + 1)

    @property
    def dim(self) -> int:
        return (self.cutoff1 + 1) * (self.cutoff2 + 1)


@dataclass
class FockDensityMatrix:
    """Dense two-mode density matrix on a FockSpace."""

    rho: np.ndarray  # (D, D) complex128
    space: FockSpace

    def __post_init__(self) -> None:
        d = self.space.dim
        if self.rho.shape != (d, d):
            raise ValueError(f"rho must be {(d, d)}, got {self.rho.shape}")

    def as4d(self) -> np.ndarray:
        d1, d2 = self.space.dims
        return self.rho.reshape(d1, d2, d1, d2)

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.rho)[0])

    def validate(
        self,
        herm_tol: float = 1e-10,
        trace_tol: float = 1e-8,
        eig_tol: float = 1e-6,
        check_eigs: bool = False,
    ) -> None:
        if self.hermiticity_defect() > herm_tol:
            raise Instability(f"hermiticity defect {self.hermiticity_defect():.2e}")
        if abs(self.trace - 1.0) > trace_tol:
            raise Instability(f"trace drifted to {self.trace!r}")
        if check_eigs and self.min_eigenvalue() < -eig_tol:
            raise Instability(f"negative eigenvalue {self.min_eigenvalue():.2e}")


def vacuum_state(space: FockSpace) -> FockDensityMatrix:
    rho = np.zeros((space.dim, space.dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    return FockDensityMatrix(rho, space)


def fock_state(space: FockSpace, n1: int, n2: int) -> FockDensityMatrix:
    d1, d2 = space.dims
    if not (0 <= n1 < d1 and 0 <= n2 < d2):
        raise ValueError("occupation outside the truncated space")
    idx = n1 * d2 + n2
    rho = np.zeros((space.dim, space.dim), dtype=np.complex128)
    rho[idx, idx] = 1.0
    return FockDensityMatrix(rho, space)


def coherent_state(space: FockSpace, alpha1: complex, alpha2: complex) -> FockDensityMatrix:
    """Truncated product coherent state |alpha1>|alpha2>, renormalized."""

    def amps(alpha, d):
        if alpha == 0:
            c = np.zeros(d, dtype=np.complex128)
            c[0] = 1.0
            return c
        n = np.arange(d)
        log_fact = np.cumsum(np.log(np.maximum(n, 1)))
        return np.exp(n * np.log(complex(alpha)) - 0.5 * log_fact - 0.5 * abs(alpha) ** 2)

    d1, d2 = space.dims
    psi = np.kron(amps(alpha1, d1), amps(alpha2, d2))
    psi = psi / np.linalg.norm(psi)
    return FockDensityMatrix(np.outer(psi, psi.conj()), space)


# -- matrix-free ladder shifts ------------------------------------------------
# Axes of the reshaped rho (n1, n2, m1, m2): 0/1 are row indices, 2/3 columns.

def _lower(x: np.ndarray, axis: int) -> np.ndarray:
    """out[n] = sqrt(n+1) x[n+1] along axis: a x (rows) or x a+ (columns)."""
    d = x.shape[axis]
    sq = np.sqrt(np.arange(1, d))
    out = np.zeros_like(x)
    src = np.moveaxis(x, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    dst[: d - 1] = sq.reshape((-1,) + (1,) * (x.ndim - 1)) * src[1:]
    return out


def _raise(x: np.ndarray, axis: int) -> np.ndarray:
    """out[n] = sqrt(n) x[n-1] along axis: a+ x (rows) or x a (columns)."""
    d = x.shape[axis]
    sq = np.sqrt(np.arange(1, d))
    out = np.zeros_like(x)
    src = np.moveaxis(x, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    dst[1:] = sq.reshape((-1,) + (1,) * (x.ndim - 1)) * src[: d - 1]
    return out


def _number_diag(space: FockSpace, well: int) -> np.ndarray:
    d1, d2 = space.dims
    n = np.arange(d1 if well == 1 else d2, dtype=np.float64)
    return n.reshape((-1, 1, 1, 1)) if well == 1 else n.reshape((1, -1, 1, 1))


def _kerr_diag(space: FockSpace) -> tuple[np.ndarray, np.ndarray]:
    """n(n-1) per well, broadcastable over row axes and column axes."""
    d1, d2 = space.dims
    n1 = np.arange(d1, dtype=np.float64)
    n2 = np.arange(d2, dtype=np.float64)
    row = (n1 * (n1 - 1)).reshape(-1, 1, 1, 1) + (n2 * (n2 - 1)).reshape(1, -1, 1, 1)
    col = (n1 * (n1 - 1)).reshape(1, 1, -1, 1) + (n2 * (n2 - 1)).reshape(1, 1, 1, -1)
    return row, col


def _apply_h_left(r4: np.ndarray, params: DimerParams, kerr_row: np.ndarray) -> np.ndarray:
    """H rho with H = chi sum a+a+aa - J(a1+ a2 + a2+ a1) + i eps (a1+ - a1)."""
    j = params.tunneling
    eps = params.pump_rate
    out = params.chi * kerr_row * r4
    out -= j * _raise(_lower(r4, 1), 0)  # a1+ a2 rho
    out -= j * _raise(_lower(r4, 0), 1)  # a2+ a1 rho
    out += 1j * eps * (_raise(r4, 0) - _lower(r4, 0))
    return out


def _apply_h_right(r4: np.ndarray, params: DimerParams, kerr_col: np.ndarray) -> np.ndarray:
    """rho H (column-side ladder shifts)."""
    j = params.tunneling
    eps = params.pump_rate
    out = params.chi * kerr_col * r4
    out -= j * _lower(_raise(r4, 3), 2)  # rho a1+ a2
    out -= j * _lower(_raise(r4, 2), 3)  # rho a2+ a1
    out += 1j * eps * (_lower(r4, 2) - _raise(r4, 2))
    return out


def liouvillian_apply(rho: FockDensityMatrix, params: DimerParams) -> np.ndarray:
    """d rho/dt = -i[H, rho] + gamma(2 a rho a+ - a+a rho - rho a+a).

    Returns a (D, D) array; the damped well is selected by params.topology.
    """
    space = rho.space
    r4 = rho.as4d()
    kerr_row, kerr_col = _kerr_diag(space)
    out = -1j * (_apply_h_left(r4, params, kerr_row) - _apply_h_right(r4, params, kerr_col))
    gamma = params.loss_rate
    if gamma > 0:
        w = params.damped_well
        row_axis = w - 1
        col_axis = w + 1
        n_row = _number_diag(space, w)
        n_col = np.moveaxis(n_row, (0, 1), (2, 3))
        out += gamma * (
            2.0 * _lower(_lower(r4, row_axis), col_axis)
            - n_row * r4
            - n_col * r4
        )
    return out.reshape(space.dim, space.dim)


def boundary_population(rho: FockDensityMatrix) -> float:
    """Total probability of basis states with n1 = cutoff1 or n2 = cutoff2."""
    r4 = rho.as4d()
    d1, d2 = rho.space.dims
    probs = np.einsum("ijij->ij", r4).real
    return float(probs[d1 - 1, :].sum() + probs[:, d2 - 1].sum() - probs[d1 - 1, d2 - 1])


def truncation_check(rho: FockDensityMatrix) -> float:
    """Boundary-state population; a run counts as converged below 1e-6."""
    return boundary_population(rho)


@dataclass
class OracleRun:
    """Saved density matrices and bookkeeping of one evolution."""

    times: np.ndarray
    states: list[FockDensityMatrix]
    renormalizations: list[tuple[float, float]]  # (time, trace drift)
    max_boundary_population: float


def evolve(
    rho0: FockDensityMatrix,
    params: DimerParams,
    dt: float,
    t_final: float,
    save_times: tuple[float, ...] | None = None,
    leak_tol: float | None = 1e-6,
    renorm_tol: float = 1e-8,
) -> OracleRun:
    """Fixed-step RK4 integration of the master equation.

    The trace is renormalized (and the event reported) whenever it drifts by
    more than renorm_tol.  Raises CutoffLeak when the boundary population
    exceeds leak_tol, and Instability on trace or Hermiticity blowup.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    n_steps = int(round(t_final / dt))
    if save_times is None:
        save_times = tuple(np.linspace(0.0, t_final, 11))
    save_steps = [int(round(t / dt)) for t in save_times]
    if any(s < 0 or s > n_steps for s in save_steps):
        raise ValueError("save times outside [0, t_final]")

    space = rho0.space
    rho = rho0.rho.copy()
    states: list[FockDensityMatrix] = []
    renorms: list[tuple[float, float]] = []
    max_leak = 0.0
    save_iter = 0

    def record(step: int) -> None:
        nonlocal save_iter, max_leak
        while save_iter < len(save_steps) and save_steps[save_iter] == step:
            fdm = FockDensityMatrix(rho.copy(), space)
            leak = boundary_population(fdm)
            max_leak = max(max_leak, leak)
            if leak_tol is not None and leak > leak_tol:
                raise CutoffLeak(
                    f"boundary population {leak:.3e} exceeds {leak_tol:.1e} at step {step}"
                )
            states.append(fdm)
            save_iter += 1

    record(0)
    current = FockDensityMatrix(rho, space)
    for step in range(n_steps):
        k1 = liouvillian_apply(current, params)
        current.rho = rho + 0.5 * dt * k1
        k2 = liouvillian_apply(current, params)
        current.rho = rho + 0.5 * dt * k2
        k3 = liouvillian_apply(current, params)
        current.rho = rho + dt * k3
        k4 = liouvillian_apply(current, params)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)

        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-4 or not np.isfinite(tr):
            raise Instability(f"trace drifted to {tr!r} at step {step + 1}")
        if abs(tr - 1.0) > renorm_tol:
            rho = rho / tr
            t_now = (step + 1) * dt
            renorms.append((t_now, tr - 1.0))
            logger.warning("renormalized trace drift %.3e at Jt=%.4f", tr - 1.0, t_now)
        current.rho = rho
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > 1e-6:
            raise Instability(f"hermiticity defect {herm:.2e} at step {step + 1}")
        record(step + 1)

    return OracleRun(
        times=np.asarray(save_times, dtype=np.float64),
        states=states,
        renormalizations=renorms,
        max_boundary_population=max_leak,
    )


# -- expectation values --------------------------------------------------------

def _trace4(r4: np.ndarray) -> complex:
    return complex(np.einsum("ijij->", r4))


def _apply_x_left(r4: np.ndarray, well: int, theta: float) -> np.ndarray:
    """X rho with X = a e^{-i theta} + a+ e^{i theta}."""
    axis = well - 1
    return np.exp(-1j * theta) * _lower(r4, axis) + np.exp(1j * theta) * _raise(r4, axis)


@dataclass
class FockExpectations:
    """Operator expectations of one density matrix, Weyl-comparable to the engine.

    x_moments[w-1][k-1] is <X_w(theta_w)^k>; powers of a single linear
    quadrature have the same value in symmetric ordering, so these compare
    directly to phase-space quadrature moments.
    """

    populations: np.ndarray  # (2,)
    amplitudes: np.ndarray  # (2,) complex <a_w>
    thetas: tuple[float, float]
    x_moments: np.ndarray  # (2, 4)
    y_moments: np.ndarray  # (2, 4)
    x_cross: float  # <X_1 X_2>
    y_cross: float  # <Y_1 Y_2>

    def var_x(self, well: int) -> float:
        m = self.x_moments[well - 1]
        return float(m[1] - m[0] ** 2)

    def var_y(self, well: int) -> float:
        m = self.y_moments[well - 1]
        return float(m[1] - m[0] ** 2)

    def cov_x(self) -> float:
        return float(self.x_cross - self.x_moments[0, 0] * self.x_moments[1, 0])

    def cov_y(self) -> float:
        return float(self.y_cross - self.y_moments[0, 0] * self.y_moments[1, 0])


def fock_expectations(
    rho: FockDensityMatrix, theta1: float = 0.0, theta2: float = 0.0
) -> FockExpectations:
    """Populations, amplitudes and quadrature moments (orders 1-4) of rho."""
    r4 = rho.as4d()
    space = rho.space

    pops = np.empty(2)
    amps = np.empty(2, dtype=np.complex128)
    for w in (1, 2):
        pops[w - 1] = _trace4(_number_diag(space, w) * r4).real
        amps[w - 1] = _trace4(_lower(r4, w - 1))

    thetas = (theta1, theta2)
    x_mom = np.empty((2, 4))
    y_mom = np.empty((2, 4))
    for w in (1, 2):
        for mom, th in ((x_mom, thetas[w - 1]), (y_mom, thetas[w - 1] + 0.5 * np.pi)):
            v = r4
            for k in range(4):
                v = _apply_x_left(v, w, th)
                mom[w - 1, k] = _trace4(v).real
    x12 = _apply_x_left(_apply_x_left(r4, 2, theta2), 1, theta1)
    y12 = _apply_x_left(
        _apply_x_left(r4, 2, theta2 + 0.5 * np.pi), 1, theta1 + 0.5 * np.pi
    )
    return FockExpectations(
        populations=pops,
        amplitudes=amps,
        thetas=(float(theta1), float(theta2)),
        x_moments=x_mom,
        y_moments=y_mom,
        x_cross=float(_trace4(x12).real),
        y_cross=float(_trace4(y12).real),
    )
