"""Observables derived from moment accumulators.

Quadratures are X(theta) = alpha e^{-i theta} + conj(alpha) e^{i theta}, so
vacuum has V(X) = 1, the Reid steering bound is Pi V >= 1 and the Duan-Simon
separability bound is 4.  Every observable is an exact polynomial in the
stored mixed moments; standard errors come from recomputing the observable
on each batch's means and taking the spread over batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import MOMENT_INDEX, MomentAccumulator

TWO_PI = 2.0 * math.pi

# A variance below this floor means "no inference possible": the inferred-
# variance correction term is dropped, which is the conservative choice.
INFERENCE_FLOOR = 1.0e-12


class SameWellCovariance(ValueError):
    """Covariance of two quadratures of the same well is not supported."""


@dataclass(frozen=True)
class QuadratureSpec:
    """One quadrature: which well, and the local-oscillator angle in radians."""

    well: int
    theta: float = 0.0

    def __post_init__(self) -> None:
        if self.well not in (1, 2):
            raise ValueError(f"well must be 1 or 2, got {self.well}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    def rotated(self, delta: float) -> "QuadratureSpec":
        return QuadratureSpec(self.well, self.theta + delta)


@dataclass
class ObservableSeries:
    """Time series of one derived observable with standard errors."""

    times: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    kind: str
    wells: tuple[int, ...] = ()
    thetas: tuple[float, ...] = ()
    n_used: int = 0
    extra: dict = field(default_factory=dict)
    batch_values: np.ndarray | None = None  # (n_batches, n_save), for window stats

    def __post_init__(self) -> None:
        assert np.all(self.stderrs >= 0)


# -- polynomial expansion of quadratures into stored monomials ---------------

def _quad_poly(spec: QuadratureSpec) -> dict[tuple[int, int, int, int], complex]:
    lo = np.exp(-1j * spec.theta)
    if spec.well == 1:
        return {(1, 0, 0, 0): lo, (0, 1, 0, 0): np.conj(lo)}
    return {(0, 0, 1, 0): lo, (0, 0, 0, 1): np.conj(lo)}


def _poly_mul(pa: dict, pb: dict) -> dict:
    out: dict[tuple[int, int, int, int], complex] = {}
    for ea, ca in pa.items():
        for eb, cb in pb.items():
            e = (ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3])
            if sum(e) > 4:
                raise ValueError("polynomial exceeds the stored moment degree (4)")
            out[e] = out.get(e, 0.0j) + ca * cb
    return out


def _poly_pow(p: dict, n: int) -> dict:
    out = {(0, 0, 0, 0): 1.0 + 0.0j}
    for _ in range(n):
        out = _poly_mul(out, p)
    return out


def _eval_series(acc: MomentAccumulator, poly: dict) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a moment polynomial: (central (n_save,), per-batch (B, n_save))."""
    idx = np.array([MOMENT_INDEX[e] for e in poly], dtype=np.intp)
    coeff = np.array(list(poly.values()), dtype=np.complex128)
    central = acc.pooled_means()[:, idx] @ coeff
    per_batch = acc.batch_means()[:, :, idx] @ coeff
    return central.real, per_batch.real


def _series(
    acc: MomentAccumulator,
    central: np.ndarray,
    per_batch: np.ndarray,
    kind: str,
    wells: tuple[int, ...] = (),
    thetas: tuple[float, ...] = (),
    extra: dict | None = None,
) -> ObservableSeries:
    n_batches = per_batch.shape[0]
    stderr = per_batch.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return ObservableSeries(
        times=acc.save_times.copy(),
        values=np.asarray(central, dtype=np.float64),
        stderrs=stderr,
        kind=kind,
        wells=wells,
        thetas=thetas,
        n_used=acc.n_total_used,
        extra=extra or {},
        batch_values=per_batch,
    )


def quadrature_moment(
    acc: MomentAccumulator, spec: QuadratureSpec, order: int
) -> ObservableSeries:
    """<X(theta)^order> for one well, order 1..4."""
    if not (1 <= order <= 4):
        raise ValueError(f"order must be in 1..4, got {order}")
    central, per_batch = _eval_series(acc, _poly_pow(_quad_poly(spec), order))
    return _series(
        acc, central, per_batch, f"x_moment_{order}", (spec.well,), (spec.theta,)
    )


def _raw_moments(acc: MomentAccumulator, spec: QuadratureSpec, up_to: int):
    """Quadrature moments 1..up_to as (central list, per-batch list)."""
    centrals, batches = [], []
    poly = _quad_poly(spec)
    acc_poly = {(0, 0, 0, 0): 1.0 + 0.0j}
    for _ in range(up_to):
        acc_poly = _poly_mul(acc_poly, poly)
        c, b = _eval_series(acc, acc_poly)
        centrals.append(c)
        batches.append(b)
    return centrals, batches


def _kappa3(m1, m2, m3):
    return m3 + 2.0 * m1**3 - 3.0 * m1 * m2


def _kappa4_simple(m1, m2, m3, m4):
    return m4 + 2.0 * m1**4 - 3.0 * m2**2 - m1 * _kappa3(m1, m2, m3)


def _kappa4_standard(m1, m2, m3, m4):
    return m4 - 4.0 * m1 * m3 - 3.0 * m2**2 + 12.0 * m1**2 * m2 - 6.0 * m1**4


def kappa3(acc: MomentAccumulator, spec: QuadratureSpec) -> ObservableSeries:
    """Third quadrature cumulant <X^3> + 2<X>^3 - 3<X><X^2>."""
    (c1, c2, c3), (b1, b2, b3) = _raw_moments(acc, spec, 3)
    return _series(
        acc, _kappa3(c1, c2, c3), _kappa3(b1, b2, b3), "kappa3", (spec.well,), (spec.theta,)
    )


def kappa4(
    acc: MomentAccumulator, spec: QuadratureSpec, convention: str = "simple"
) -> ObservableSeries:
    """Fourth quadrature cumulant.

    convention="simple":   <X^4> + 2<X>^4 - 3<X^2>^2 - <X> kappa3, the compact
                           form common in the quadrature-cumulant literature
    convention="standard": the textbook fourth cumulant
    The two coincide whenever <X> = 0, and both vanish for Gaussian moments.
    """
    if convention not in ("simple", "standard"):
        raise ValueError(f"unknown kappa4 convention {convention!r}")
    f = _kappa4_simple if convention == "simple" else _kappa4_standard
    (c1, c2, c3, c4), (b1, b2, b3, b4) = _raw_moments(acc, spec, 4)
    return _series(
        acc,
        f(c1, c2, c3, c4),
        f(b1, b2, b3, b4),
        f"kappa4_{convention}",
        (spec.well,),
        (spec.theta,),
    )


def quad_variance(acc: MomentAccumulator, spec: QuadratureSpec) -> ObservableSeries:
    """V(X) = <X^2> - <X>^2."""
    (c1, c2), (b1, b2) = _raw_moments(acc, spec, 2)
    return _series(
        acc, c2 - c1**2, b2 - b1**2, "variance", (spec.well,), (spec.theta,)
    )


def quad_covariance(
    acc: MomentAccumulator, spec_i: QuadratureSpec, spec_j: QuadratureSpec
) -> ObservableSeries:
    """V(X_i, X_j) = <X_i X_j> - <X_i><X_j> for quadratures of distinct wells."""
    if spec_i.well == spec_j.well:
        raise SameWellCovariance(
            "same-well covariance has an operator-ordering ambiguity; not supported"
        )
    ci, bi = _eval_series(acc, _quad_poly(spec_i))
    cj, bj = _eval_series(acc, _quad_poly(spec_j))
    cij, bij = _eval_series(acc, _poly_mul(_quad_poly(spec_i), _quad_poly(spec_j)))
    return _series(
        acc,
        cij - ci * cj,
        bij - bi * bj,
        "covariance",
        (spec_i.well, spec_j.well),
        (spec_i.theta, spec_j.theta),
    )


def _inferred_variance(v_i, v_j, cov):
    """V_inf = V_i - cov^2 / V_j, dropping the correction when V_j ~ 0."""
    v_j_safe = np.where(np.abs(v_j) < INFERENCE_FLOOR, 1.0, v_j)
    corr = np.where(np.abs(v_j) < INFERENCE_FLOOR, 0.0, cov**2 / v_j_safe)
    return v_i - corr


def _epr_arrays(acc: MomentAccumulator, inferred_well: int, theta_i: float, theta_j: float):
    other = 2 if inferred_well == 1 else 1
    xi = QuadratureSpec(inferred_well, theta_i)
    xj = QuadratureSpec(other, theta_j)
    yi = xi.rotated(0.5 * math.pi)
    yj = xj.rotated(0.5 * math.pi)

    def vv(spec):
        (c1, c2), (b1, b2) = _raw_moments(acc, spec, 2)
        return c2 - c1**2, b2 - b1**2

    def cov(si, sj):
        ci, bi = _eval_series(acc, _quad_poly(si))
        cj, bj = _eval_series(acc, _quad_poly(sj))
        cij, bij = _eval_series(acc, _poly_mul(_quad_poly(si), _quad_poly(sj)))
        return cij - ci * cj, bij - bi * bj

    vxi, bvxi = vv(xi)
    vxj, bvxj = vv(xj)
    vyi, bvyi = vv(yi)
    vyj, bvyj = vv(yj)
    cx, bcx = cov(xi, xj)
    cy, bcy = cov(yi, yj)
    central = _inferred_variance(vxi, vxj, cx) * _inferred_variance(vyi, vyj, cy)
    per_batch = _inferred_variance(bvxi, bvxj, bcx) * _inferred_variance(bvyi, bvyj, bcy)
    return central, per_batch


def epr_product(
    acc: MomentAccumulator, inferred_well: int, theta_i: float, theta_j: float
) -> ObservableSeries:
    """Reid product Pi V = V_inf(X_i) V_inf(Y_i), inferring well i from well j.

    Y is X(theta + pi/2) on each well.  Values below 1 certify EPR steering.
    """
    if inferred_well not in (1, 2):
        raise ValueError(f"inferred_well must be 1 or 2, got {inferred_well}")
    central, per_batch = _epr_arrays(acc, inferred_well, theta_i, theta_j)
    return _series(
        acc,
        central,
        per_batch,
        "pi_v",
        (inferred_well, 2 if inferred_well == 1 else 1),
        (float(theta_i) % TWO_PI, float(theta_j) % TWO_PI),
        extra={"bound": 1.0},
    )


# -- fast closed-form Pi V over angle grids ----------------------------------

def _second_moment_summary(acc: MomentAccumulator, time_index: int):
    m = acc.pooled_means()[time_index]

    def g(e):
        return m[MOMENT_INDEX[e]]

    mu1 = g((1, 0, 0, 0))
    mu2 = g((0, 0, 1, 0))
    return {
        "c11": g((2, 0, 0, 0)) - mu1 * mu1,
        "c22": g((0, 0, 2, 0)) - mu2 * mu2,
        "c12": g((1, 0, 1, 0)) - mu1 * mu2,
        "n11": (g((1, 1, 0, 0)) - mu1 * np.conj(mu1)).real,
        "n22": (g((0, 0, 1, 1)) - mu2 * np.conj(mu2)).real,
        "n12": g((1, 0, 0, 1)) - mu1 * np.conj(mu2),
    }


def _pi_v_grid(summary: dict, inferred_well: int, thetas_i: np.ndarray, thetas_j: np.ndarray):
    """Pi V on the outer grid thetas_i x thetas_j from centered second moments."""
    if inferred_well == 1:
        cii, cjj = summary["c11"], summary["c22"]
        nii, njj = summary["n11"], summary["n22"]
        cij, nij = summary["c12"], summary["n12"]
    else:
        cii, cjj = summary["c22"], summary["c11"]
        nii, njj = summary["n22"], summary["n11"]
        cij, nij = summary["c12"], np.conj(summary["n12"])

    ti = thetas_i[:, None]
    tj = thetas_j[None, :]

    def pair_product(shift):
        # V for X at angles theta+shift (shift=0 for X, pi/2 for Y)
        vi = 2.0 * (np.exp(-2j * (ti + shift)) * cii).real + 2.0 * nii
        vj = 2.0 * (np.exp(-2j * (tj + shift)) * cjj).real + 2.0 * njj
        cov = (
            2.0 * (np.exp(-1j * (ti + tj + 2 * shift)) * cij).real
            + 2.0 * (np.exp(-1j * (ti - tj)) * nij).real
        )
        return _inferred_variance(vi + 0.0 * vj, vj + 0.0 * vi, cov)

    return pair_product(0.0) * pair_product(0.5 * math.pi)


@dataclass(frozen=True)
class EprOptimum:
    theta_i: float
    theta_j: float
    pi_v: float


def optimize_epr(
    acc: MomentAccumulator,
    inferred_well: int,
    angle_grid_size: int = 180,
    time_index: int = -1,
) -> EprOptimum:
    """Minimize Pi V over quadrature angles at one save time.

    Exhaustive grid over [0, pi) x [0, pi) (Pi V is pi-periodic in each
    angle), then one local refinement pass at 10x resolution around the grid
    minimum.  Ties break toward the lexicographically smallest (theta_i,
    theta_j) because the scan is in ascending row-major order.
    """
    if angle_grid_size < 4:
        raise ValueError("angle grid must have at least 4 points")
    summary = _second_moment_summary(acc, time_index)
    h = math.pi / angle_grid_size
    grid = np.arange(angle_grid_size) * h
    values = _pi_v_grid(summary, inferred_well, grid, grid)
    flat = int(np.argmin(values))
    i0, j0 = divmod(flat, angle_grid_size)

    # refinement angles wrapped into [0, pi) and scanned in ascending order,
    # so the first minimum is again the lexicographically smallest pair
    fine_i = np.sort((grid[i0] + np.linspace(-h, h, 21)) % math.pi)
    fine_j = np.sort((grid[j0] + np.linspace(-h, h, 21)) % math.pi)
    fine = _pi_v_grid(summary, inferred_well, fine_i, fine_j)
    flat = int(np.argmin(fine))
    fi, fj = divmod(flat, len(fine_j))
    return EprOptimum(
        theta_i=float(fine_i[fi]),
        theta_j=float(fine_j[fj]),
        pi_v=float(fine[fi, fj]),
    )


def duan_simon(acc: MomentAccumulator, theta: float = 0.0) -> ObservableSeries:
    """Duan-Simon sum V(X_1 + X_2) + V(Y_1 - Y_2); separability bound 4."""
    x1 = QuadratureSpec(1, theta)
    x2 = QuadratureSpec(2, theta)
    y1 = x1.rotated(0.5 * math.pi)
    y2 = x2.rotated(0.5 * math.pi)

    def v(spec):
        (c1, c2), (b1, b2) = _raw_moments(acc, spec, 2)
        return c2 - c1**2, b2 - b1**2

    def cov(si, sj):
        ci, bi = _eval_series(acc, _quad_poly(si))
        cj, bj = _eval_series(acc, _quad_poly(sj))
        cij, bij = _eval_series(acc, _poly_mul(_quad_poly(si), _quad_poly(sj)))
        return cij - ci * cj, bij - bi * bj

    vx1, bvx1 = v(x1)
    vx2, bvx2 = v(x2)
    vy1, bvy1 = v(y1)
    vy2, bvy2 = v(y2)
    cx, bcx = cov(x1, x2)
    cy, bcy = cov(y1, y2)
    central = vx1 + vx2 + 2.0 * cx + vy1 + vy2 - 2.0 * cy
    per_batch = bvx1 + bvx2 + 2.0 * bcx + bvy1 + bvy2 - 2.0 * bcy
    return _series(
        acc, central, per_batch, "duan_simon", (1, 2), (float(theta) % TWO_PI,),
        extra={"bound": 4.0},
    )


def population(acc: MomentAccumulator, well: int) -> ObservableSeries:
    """Mean atom number: mean(|alpha|^2) - 1/2 (symmetric-ordering correction)."""
    if well not in (1, 2):
        raise ValueError(f"well must be 1 or 2, got {well}")
    e = (1, 1, 0, 0) if well == 1 else (0, 0, 1, 1)
    central, per_batch = _eval_series(acc, {e: 1.0 + 0.0j})
    return _series(acc, central - 0.5, per_batch - 0.5, "population", (well,))


def mean_amplitude(acc: MomentAccumulator, well: int, part: str = "re") -> ObservableSeries:
    """Re or Im of the mean amplitude <alpha_well>."""
    if part not in ("re", "im"):
        raise ValueError(f"part must be 're' or 'im', got {part!r}")
    e = (1, 0, 0, 0) if well == 1 else (0, 0, 1, 0)
    idx = MOMENT_INDEX[e]
    pooled = acc.pooled_means()[:, idx]
    batch = acc.batch_means()[:, :, idx]
    take = np.real if part == "re" else np.imag
    return _series(acc, take(pooled), take(batch), f"mean_{part}", (well,))


# -- steady-state extraction --------------------------------------------------

@dataclass(frozen=True)
class SteadyValue:
    value: float
    stderr: float
    slope: float
    stationary: bool


def steady_value(series: ObservableSeries, fraction: float = 0.25) -> SteadyValue:
    """Mean of a series over its trailing window, with a stationarity flag.

    The window covers the last `fraction` of the save times.  The value is
    the window mean; its standard error is the batch spread of per-batch
    window means.  The run is flagged stationary when the fitted linear
    trend over the window is insignificant: |slope| below twice the slope's
    own standard error (from the batch spread of per-batch slopes).
    """
    n = len(series.times)
    lo = max(0, n - max(2, int(math.ceil(fraction * n))))
    t = series.times[lo:]
    v = series.values[lo:]
    slope = float(np.polyfit(t, v, 1)[0]) if len(t) > 1 else 0.0
    if series.batch_values is not None:
        window = series.batch_values[:, lo:]
        n_b = window.shape[0]
        window_means = window.mean(axis=1)
        stderr = float(window_means.std(ddof=1) / math.sqrt(n_b))
        if len(t) > 1 and n_b > 1:
            batch_slopes = np.polyfit(t, window.T, 1)[0]
            slope_err = float(batch_slopes.std(ddof=1) / math.sqrt(n_b))
        else:
            slope_err = 0.0
    else:
        stderr = float(np.mean(series.stderrs[lo:]))
        slope_err = 0.0
    if slope_err > 0:
        stationary = bool(abs(slope) <= 2.0 * slope_err)
    else:
        span = float(t[-1] - t[0]) if len(t) > 1 else 0.0
        stationary = bool(abs(slope) * span <= max(stderr, 1e-300))
    return SteadyValue(
        value=float(v.mean()),
        stderr=stderr,
        slope=slope,
        stationary=stationary,
    )
