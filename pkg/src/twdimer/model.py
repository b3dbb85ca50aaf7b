"""Physical model of the pumped, damped two-well Bose-Hubbard system.

Two bosonic modes (wells) coupled by tunneling J, with an on-site
collisional nonlinearity chi, a coherent pump feeding well 1 at rate
epsilon, and amplitude damping of exactly one well at rate gamma.  The
phase-space equations of motion for the complex mode amplitudes are

    d alpha_1/dt = epsilon - gamma_1 alpha_1 - 2i chi |alpha_1|^2 alpha_1 + iJ alpha_2
    d alpha_2/dt =         - gamma_2 alpha_2 - 2i chi |alpha_2|^2 alpha_2 + iJ alpha_1

with (gamma_1, gamma_2) = (0, gamma) or (gamma, 0) depending on which well
is damped, plus an additive complex Gaussian noise of amplitude sqrt(gamma)
on the damped well only.  Trajectory averages of products of the amplitudes
estimate symmetrically ordered operator moments, so vacuum is sampled with
variance 1/4 per quadrature component (mean |alpha|^2 = 1/2).

All rates are in units of J and time is the dimensionless Jt.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Topology(enum.Enum):
    """Selects the damped well. The pump always feeds well 1."""

    LOSS_AT_WELL_1 = 1
    LOSS_AT_WELL_2 = 2


@dataclass(frozen=True)
class DimerParams:
    """Physical constants of the dimer, in units of the tunneling J.

    Attributes
    ----------
    chi : float
        Collisional nonlinearity (>= 0).
    tunneling : float
        Tunneling strength J (> 0); the frequency and time unit.
    pump_rate : float
        Amplitude pump rate epsilon into well 1 (>= 0).
    loss_rate : float
        Amplitude damping rate gamma of the damped well (>= 0).
    topology : Topology
        Which well is damped.
    kerr_shift : float
        Ordering constant s in the Kerr drift -2i chi (|alpha|^2 - s) alpha.
        The Weyl symbol of a+a+aa is |alpha|^4 - 2|alpha|^2 + 1/2, so the
        exact phase-space drift has s = 1; s = 0 gives the plain form often
        quoted for large occupations.  The two differ by O(1/n) and only the
        s = 1 drift matches the exact master equation at occupations near 1.
    """

    chi: float
    tunneling: float = 1.0
    pump_rate: float = 10.0
    loss_rate: float = 1.0
    topology: Topology = Topology.LOSS_AT_WELL_2
    kerr_shift: float = 1.0

    def __post_init__(self) -> None:
        if self.tunneling <= 0:
            raise ValueError(f"tunneling must be > 0, got {self.tunneling}")
        if self.chi < 0:
            raise ValueError(f"chi must be >= 0, got {self.chi}")
        if self.pump_rate < 0:
            raise ValueError(f"pump_rate must be >= 0, got {self.pump_rate}")
        if self.loss_rate < 0:
            raise ValueError(f"loss_rate must be >= 0, got {self.loss_rate}")
        if not isinstance(self.topology, Topology):
            raise ValueError(f"topology must be a Topology, got {self.topology!r}")

    @property
    def damping_rates(self) -> tuple[float, float]:
        """(gamma_1, gamma_2): per-well amplitude damping rates."""
        if self.topology is Topology.LOSS_AT_WELL_1:
            return (self.loss_rate, 0.0)
        return (0.0, self.loss_rate)

    @property
    def damped_well(self) -> int:
        """Index (1 or 2) of the damped well."""
        return self.topology.value


@dataclass(frozen=True)
class WignerState:
    """Complex mode amplitudes of one trajectory."""

    alpha1: complex
    alpha2: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2], dtype=np.complex128)


def drift(state: WignerState, params: DimerParams) -> WignerState:
    """Deterministic part of the equations of motion.

    Returns (d alpha_1/dt, d alpha_2/dt) as a WignerState-shaped derivative.
    Pure function; the noise term is handled separately (see noise_vector).
    """
    a1, a2 = state.alpha1, state.alpha2
    g1, g2 = params.damping_rates
    chi = params.chi
    s = params.kerr_shift
    j = params.tunneling
    d1 = (
        params.pump_rate
        - g1 * a1
        - 2j * chi * (a1.real * a1.real + a1.imag * a1.imag - s) * a1
        + 1j * j * a2
    )
    d2 = (
        -g2 * a2
        - 2j * chi * (a2.real * a2.real + a2.imag * a2.imag - s) * a2
        + 1j * j * a1
    )
    return WignerState(d1, d2)


def noise_vector(params: DimerParams) -> tuple[float, float]:
    """Additive noise amplitude per well: sqrt(gamma) on the damped well only.

    The complex increment over a step dt has independent real and imaginary
    parts of variance dt/2 each, so that the discrete average of
    eta*(t) eta(t') reproduces delta(t - t').
    """
    amp = float(np.sqrt(params.loss_rate))
    if params.topology is Topology.LOSS_AT_WELL_1:
        return (amp, 0.0)
    return (0.0, amp)


def sample_vacuum(rng: np.random.Generator) -> WignerState:
    """Draw one vacuum sample: alpha = (n_re + i n_im)/2 per mode.

    Each real component has variance 1/4, so the ensemble satisfies
    mean(|alpha|^2) = 1/2, the symmetrically ordered vacuum occupation.
    """
    n = rng.standard_normal(4)
    return WignerState(
        alpha1=0.5 * (n[0] + 1j * n[1]),
        alpha2=0.5 * (n[2] + 1j * n[3]),
    )


def linear_fixed_point(params: DimerParams) -> WignerState:
    """Analytic steady state of the chi = 0 drift.

    For loss at well 2: alpha_1 = eps*gamma/J^2, alpha_2 = i*eps/J.
    For loss at well 1: alpha_1 = 0, alpha_2 = i*eps/J.
    Only meaningful for loss_rate > 0 (otherwise no steady state exists).
    """
    eps = params.pump_rate
    j = params.tunneling
    if params.topology is Topology.LOSS_AT_WELL_1:
        return WignerState(0.0 + 0.0j, 1j * eps / j)
    return WignerState(eps * params.loss_rate / j**2 + 0.0j, 1j * eps / j)


def linear_drift_matrix(params: DimerParams) -> np.ndarray:
    """Drift matrix A of the chi = 0 linear system d(alpha)/dt = A alpha + (eps, 0)."""
    g1, g2 = params.damping_rates
    j = params.tunneling
    return np.array([[-g1, 1j * j], [1j * j, -g2]], dtype=np.complex128)
