import numpy as np
import pytest

from twdimer.model import (
    DimerParams,
    Topology,
    WignerState,
    drift,
    linear_drift_matrix,
    linear_fixed_point,
    noise_vector,
    sample_vacuum,
)


def test_params_validation():
    with pytest.raises(ValueError):
        DimerParams(chi=-0.1)
    with pytest.raises(ValueError):
        DimerParams(chi=0.0, tunneling=0.0)
    with pytest.raises(ValueError):
        DimerParams(chi=0.0, pump_rate=-1.0)
    with pytest.raises(ValueError):
        DimerParams(chi=0.0, loss_rate=-1.0)


def test_drift_at_origin_is_pump_only():
    params = DimerParams(chi=0.3, pump_rate=7.0)
    d = drift(WignerState(0j, 0j), params)
    assert d.alpha1 == 7.0
    assert d.alpha2 == 0.0


def test_drift_vanishes_at_linear_fixed_point():
    # alpha1 = eps*gamma/J^2, alpha2 = i*J*alpha1/gamma; verified by substitution
    params = DimerParams(chi=0.0, pump_rate=10.0, loss_rate=1.0, tunneling=1.0)
    fp = linear_fixed_point(params)
    assert fp.alpha1 == 10.0 and fp.alpha2 == 10.0j
    d = drift(fp, params)
    assert abs(d.alpha1) < 1e-12 and abs(d.alpha2) < 1e-12

    scaled = DimerParams(chi=0.0, pump_rate=3.0, loss_rate=0.5, tunneling=2.0)
    d2 = drift(linear_fixed_point(scaled), scaled)
    assert abs(d2.alpha1) < 1e-12 and abs(d2.alpha2) < 1e-12


def test_drift_term_by_term():
    # plain large-occupation form (kerr_shift = 0):
    # chi=1e-3, alpha1=1, alpha2=0 -> d alpha1 = eps - 2i*1e-3
    params = DimerParams(chi=1e-3, pump_rate=10.0, kerr_shift=0.0)
    d = drift(WignerState(1.0 + 0j, 0j), params)
    assert d.alpha1 == pytest.approx(10.0 - 2e-3j)
    assert d.alpha2 == pytest.approx(1j)
    # default Weyl-ordered drift shifts |alpha|^2 by one
    weyl = drift(WignerState(1.0 + 0j, 0j), DimerParams(chi=1e-3, pump_rate=10.0))
    assert weyl.alpha1 == pytest.approx(10.0 + 0j)
    assert weyl.alpha1 == pytest.approx(d.alpha1 + 2j * 1e-3 * 1.0)


def test_noise_vector_placement():
    assert noise_vector(DimerParams(chi=0.0, loss_rate=1.0)) == (0.0, 1.0)
    assert noise_vector(DimerParams(chi=0.0, loss_rate=0.0)) == (0.0, 0.0)
    assert noise_vector(
        DimerParams(chi=0.0, loss_rate=4.0, topology=Topology.LOSS_AT_WELL_1)
    ) == (2.0, 0.0)


def test_vacuum_sampling_moments():
    rng = np.random.default_rng(1234)
    n = 1_000_000
    states = [sample_vacuum(rng) for _ in range(n)]
    a1 = np.array([s.alpha1 for s in states])
    a2 = np.array([s.alpha2 for s in states])
    se = 0.5 / np.sqrt(n)
    assert abs(a1.mean()) < 3 * se and abs(a2.mean()) < 3 * se
    # mean |alpha|^2 = 1/2 exactly in the ensemble limit (vacuum width)
    assert abs(np.mean(np.abs(a1) ** 2) - 0.5) < 0.002
    assert abs(np.mean(np.abs(a2) ** 2) - 0.5) < 0.002
    # population estimator is centered on zero atoms
    assert abs(np.mean(np.abs(a1) ** 2) - 0.5) < 4 * np.sqrt(0.25 / n)


def test_number_conservation_without_pump_and_loss():
    params = DimerParams(chi=0.7, pump_rate=0.0, loss_rate=0.0)
    rng = np.random.default_rng(7)
    for _ in range(50):
        s = WignerState(*(rng.standard_normal(2) + 1j * rng.standard_normal(2)))
        d = drift(s, params)
        # d|a1|^2/dt + d|a2|^2/dt = 2 Re(conj(a) . da/dt) = 0
        rate = 2 * (np.conj(s.alpha1) * d.alpha1 + np.conj(s.alpha2) * d.alpha2).real
        assert abs(rate) < 1e-12 * (abs(s.alpha1) ** 2 + abs(s.alpha2) ** 2 + 1)


def test_global_phase_equivariance_without_pump():
    params = DimerParams(chi=0.3, pump_rate=0.0, loss_rate=0.8)
    rng = np.random.default_rng(8)
    for _ in range(50):
        s = WignerState(*(rng.standard_normal(2) + 1j * rng.standard_normal(2)))
        phi = rng.uniform(0, 2 * np.pi)
        ph = np.exp(1j * phi)
        d = drift(s, params)
        d_rot = drift(WignerState(ph * s.alpha1, ph * s.alpha2), params)
        assert d_rot.alpha1 == pytest.approx(ph * d.alpha1, rel=1e-12)
        assert d_rot.alpha2 == pytest.approx(ph * d.alpha2, rel=1e-12)


def test_topology_swaps_only_the_damping_term():
    p2 = DimerParams(chi=0.2, pump_rate=3.0, loss_rate=0.9)
    p1 = DimerParams(chi=0.2, pump_rate=3.0, loss_rate=0.9, topology=Topology.LOSS_AT_WELL_1)
    rng = np.random.default_rng(9)
    for _ in range(50):
        a1, a2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        d2 = drift(WignerState(a1, a2), p2)
        d1 = drift(WignerState(a1, a2), p1)
        gamma = 0.9
        assert d1.alpha1 == pytest.approx(d2.alpha1 - gamma * a1, rel=1e-12)
        assert d1.alpha2 == pytest.approx(d2.alpha2 + gamma * a2, rel=1e-12)


def test_linear_drift_matrix_matches_drift():
    params = DimerParams(chi=0.0, pump_rate=4.0, loss_rate=1.3)
    a = linear_drift_matrix(params)
    s = WignerState(0.3 - 0.2j, 1.1 + 0.5j)
    d = drift(s, params)
    v = a @ s.as_array() + np.array([params.pump_rate, 0.0])
    assert d.alpha1 == pytest.approx(v[0]) and d.alpha2 == pytest.approx(v[1])
