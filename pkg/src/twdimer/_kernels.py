"""Numba kernels: counter-based RNG and the trajectory integrator.

Every random number is a pure function of (master_seed, trajectory index,
step index, draw purpose) through a Philox-4x32-10 block cipher, so a
trajectory is reproducible in isolation and ensembles give bit-identical
results for any worker count or work partition.

Normals come from the inverse-CDF transform (Wichura's AS241 PPND16
approximation, good to about 1e-15) applied to 53-bit uniforms, which keeps
the uniform-draw consumption fixed per step, a requirement for the counter
addressing above.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

# Divergence guard: a trajectory is discarded once |alpha| exceeds 1e6.
GUARD_SQ = 1.0e12

# Draw purposes (second counter word). Vacuum draws use the step-0 slot.
_PURPOSE_INIT1 = np.uint64(0)
_PURPOSE_INIT2 = np.uint64(1)
_PURPOSE_NOISE = np.uint64(2)

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(inline="always", cache=True)
def _philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox-4x32 with 10 rounds. Inputs/outputs are 32-bit values in uint64."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SH32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SH32
        lo1 = p1 & _MASK32
        n0 = hi1 ^ c1 ^ k0
        n1 = lo1
        n2 = hi0 ^ c3 ^ k1
        n3 = lo0
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


@njit(inline="always", cache=True)
def _to_unit(hi, lo):
    """Two 32-bit words -> double in (0, 1)."""
    bits = ((hi << _SH32) | lo) >> _SH11
    return np.float64(bits) * _INV53 + 0.5 * _INV53


@njit(inline="always", cache=True)
def _norm_ppf(p):
    """Inverse standard normal CDF, Wichura AS241 (PPND16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    if q < 0.0:
        return -val
    return val


@njit(inline="always", cache=True)
def _gauss_pair(seed_lo, seed_hi, traj, step, purpose):
    """Two independent standard normals addressed by (seed, traj, step, purpose)."""
    x0, x1, x2, x3 = _philox4x32(
        step & _MASK32,
        purpose,
        seed_lo,
        seed_hi,
        traj & _MASK32,
        (traj >> _SH32) & _MASK32,
    )
    return _norm_ppf(_to_unit(x0, x1)), _norm_ppf(_to_unit(x2, x3))


@njit(cache=True)
def _integrate_one(
    seed_lo,
    seed_hi,
    traj,
    chi,
    ks,
    tun,
    eps,
    g1,
    g2,
    noise_well,
    noise_amp,
    dt,
    n_steps,
    noise_subdiv,
    save_steps,
    init_mode,
    init_a1,
    init_a2,
    out_states,
):
    """Integrate one trajectory; fill out_states at save_steps.

    RK4 for the drift plus additive Euler-Maruyama noise each step (noise is
    additive, so Ito and Stratonovich coincide).  Returns True if the
    divergence guard tripped.
    """
    if init_mode == 0:
        z0, z1 = _gauss_pair(seed_lo, seed_hi, traj, np.uint64(0), _PURPOSE_INIT1)
        z2, z3 = _gauss_pair(seed_lo, seed_hi, traj, np.uint64(0), _PURPOSE_INIT2)
        a1 = 0.5 * complex(z0, z1)
        a2 = 0.5 * complex(z2, z3)
    else:
        a1 = init_a1
        a2 = init_a2

    n_save = save_steps.shape[0]
    si = 0
    if n_save > 0 and save_steps[0] == 0:
        out_states[0, 0] = a1
        out_states[0, 1] = a2
        si = 1

    slot_scale = np.sqrt(dt / (2.0 * noise_subdiv))
    half = 0.5 * dt
    sixth = dt / 6.0
    tc = 2.0 * chi

    for s in range(n_steps):
        # RK4 stage 1
        k11 = eps - g1 * a1 + 1j * (tun * a2 - tc * (a1.real * a1.real + a1.imag * a1.imag - ks) * a1)
        k12 = -g2 * a2 + 1j * (tun * a1 - tc * (a2.real * a2.real + a2.imag * a2.imag - ks) * a2)
        # stage 2
        b1 = a1 + half * k11
        b2 = a2 + half * k12
        k21 = eps - g1 * b1 + 1j * (tun * b2 - tc * (b1.real * b1.real + b1.imag * b1.imag - ks) * b1)
        k22 = -g2 * b2 + 1j * (tun * b1 - tc * (b2.real * b2.real + b2.imag * b2.imag - ks) * b2)
        # stage 3
        b1 = a1 + half * k21
        b2 = a2 + half * k22
        k31 = eps - g1 * b1 + 1j * (tun * b2 - tc * (b1.real * b1.real + b1.imag * b1.imag - ks) * b1)
        k32 = -g2 * b2 + 1j * (tun * b1 - tc * (b2.real * b2.real + b2.imag * b2.imag - ks) * b2)
        # stage 4
        b1 = a1 + dt * k31
        b2 = a2 + dt * k32
        k41 = eps - g1 * b1 + 1j * (tun * b2 - tc * (b1.real * b1.real + b1.imag * b1.imag - ks) * b1)
        k42 = -g2 * b2 + 1j * (tun * b1 - tc * (b2.real * b2.real + b2.imag * b2.imag - ks) * b2)

        a1 = a1 + sixth * (k11 + 2.0 * (k21 + k31) + k41)
        a2 = a2 + sixth * (k12 + 2.0 * (k22 + k32) + k42)

        if noise_amp != 0.0:
            base = np.uint64(s * noise_subdiv)
            acc = 0.0j
            for k in range(noise_subdiv):
                z0, z1 = _gauss_pair(seed_lo, seed_hi, traj, base + np.uint64(k), _PURPOSE_NOISE)
                acc += complex(z0, z1)
            if noise_well == 1:
                a1 = a1 + noise_amp * slot_scale * acc
            else:
                a2 = a2 + noise_amp * slot_scale * acc

        m1 = a1.real * a1.real + a1.imag * a1.imag
        m2 = a2.real * a2.real + a2.imag * a2.imag
        if not (m1 < GUARD_SQ and m2 < GUARD_SQ):
            return True

        if si < n_save and save_steps[si] == s + 1:
            out_states[si, 0] = a1
            out_states[si, 1] = a2
            si += 1

    return False


# Trajectories are integrated in blocks of LANES independent lanes; the
# interleaving hides the floating-point latency of each trajectory's serial
# RK4 chain.  Lane results are bit-identical to the scalar path because every
# lane performs the same operation sequence on its own data.
LANES = 8


@njit(cache=True)
def _integrate_block(
    seed_lo,
    seed_hi,
    traj0,
    n_active,
    chi,
    ks,
    tun,
    eps,
    g1,
    g2,
    noise_well,
    noise_amp,
    dt,
    n_steps,
    noise_subdiv,
    save_steps,
    init_mode,
    init_a1,
    init_a2,
    states,
    alive,
):
    """Integrate lanes traj0 .. traj0+n_active-1 simultaneously.

    states has shape (LANES, n_save, 2); alive[w] is False when lane w
    tripped the divergence guard.  Lanes >= n_active are skipped.
    """
    a1 = np.empty(LANES, np.complex128)
    a2 = np.empty(LANES, np.complex128)
    for w in range(n_active):
        alive[w] = True
        if init_mode == 0:
            traj = np.uint64(traj0 + w)
            z0, z1 = _gauss_pair(seed_lo, seed_hi, traj, np.uint64(0), _PURPOSE_INIT1)
            z2, z3 = _gauss_pair(seed_lo, seed_hi, traj, np.uint64(0), _PURPOSE_INIT2)
            a1[w] = 0.5 * complex(z0, z1)
            a2[w] = 0.5 * complex(z2, z3)
        else:
            a1[w] = init_a1
            a2[w] = init_a2
    for w in range(n_active, LANES):
        alive[w] = False
        a1[w] = 0.0j
        a2[w] = 0.0j

    n_save = save_steps.shape[0]
    si = 0
    if n_save > 0 and save_steps[0] == 0:
        for w in range(n_active):
            states[w, 0, 0] = a1[w]
            states[w, 0, 1] = a2[w]
        si = 1

    slot_scale = noise_amp * np.sqrt(dt / (2.0 * noise_subdiv))
    half = 0.5 * dt
    sixth = dt / 6.0
    tc = 2.0 * chi

    for s in range(n_steps):
        for w in range(n_active):
            if not alive[w]:
                continue
            x1 = a1[w]
            x2 = a2[w]
            k11 = eps - g1 * x1 + 1j * (tun * x2 - tc * (x1.real * x1.real + x1.imag * x1.imag - ks) * x1)
            k12 = -g2 * x2 + 1j * (tun * x1 - tc * (x2.real * x2.real + x2.imag * x2.imag - ks) * x2)
            b1 = x1 + half * k11
            b2 = x2 + half * k12
            k21 = eps - g1 * b1 + 1j * (tun * b2 - tc * (b1.real * b1.real + b1.imag * b1.imag - ks) * b1)
            k22 = -g2 * b2 + 1j * (tun * b1 - tc * (b2.real * b2.real + b2.imag * b2.imag - ks) * b2)
            b1 = x1 + half * k21
            b2 = x2 + half * k22
            k31 = eps - g1 * b1 + 1j * (tun * b2 - tc * (b1.real * b1.real + b1.imag * b1.imag - ks) * b1)
            k32 = -g2 * b2 + 1j * (tun * b1 - tc * (b2.real * b2.real + b2.imag * b2.imag - ks) * b2)
            b1 = x1 + dt * k31
            b2 = x2 + dt * k32
            k41 = eps - g1 * b1 + 1j * (tun * b2 - tc * (b1.real * b1.real + b1.imag * b1.imag - ks) * b1)
            k42 = -g2 * b2 + 1j * (tun * b1 - tc * (b2.real * b2.real + b2.imag * b2.imag - ks) * b2)
            a1[w] = x1 + sixth * (k11 + 2.0 * (k21 + k31) + k41)
            a2[w] = x2 + sixth * (k12 + 2.0 * (k22 + k32) + k42)

        if noise_amp != 0.0:
            base = np.uint64(s * noise_subdiv)
            for w in range(n_active):
                if not alive[w]:
                    continue
                traj = np.uint64(traj0 + w)
                acc = 0.0j
                for k in range(noise_subdiv):
                    z0, z1 = _gauss_pair(seed_lo, seed_hi, traj, base + np.uint64(k), _PURPOSE_NOISE)
                    acc += complex(z0, z1)
                if noise_well == 1:
                    a1[w] = a1[w] + slot_scale * acc
                else:
                    a2[w] = a2[w] + slot_scale * acc

        for w in range(n_active):
            if alive[w]:
                m1 = a1[w].real * a1[w].real + a1[w].imag * a1[w].imag
                m2 = a2[w].real * a2[w].real + a2[w].imag * a2[w].imag
                if not (m1 < GUARD_SQ and m2 < GUARD_SQ):
                    alive[w] = False

        if si < n_save and save_steps[si] == s + 1:
            for w in range(n_active):
                states[w, si, 0] = a1[w]
                states[w, si, 1] = a2[w]
            si += 1


@njit(inline="always", cache=True)
def _accumulate_states(states, exps, p1, q1, p2, q2, bsum):
    """Add one trajectory's mixed monomials alpha1^p conj(alpha1)^q alpha2^r conj(alpha2)^s."""
    n_save = states.shape[0]
    n_mono = exps.shape[0]
    for t in range(n_save):
        a1 = states[t, 0]
        a2 = states[t, 1]
        c1 = complex(a1.real, -a1.imag)
        c2 = complex(a2.real, -a2.imag)
        p1[0] = 1.0 + 0.0j
        q1[0] = 1.0 + 0.0j
        p2[0] = 1.0 + 0.0j
        q2[0] = 1.0 + 0.0j
        for k in range(1, 5):
            p1[k] = p1[k - 1] * a1
            q1[k] = q1[k - 1] * c1
            p2[k] = p2[k - 1] * a2
            q2[k] = q2[k - 1] * c2
        for m in range(n_mono):
            bsum[t, m] += p1[exps[m, 0]] * q1[exps[m, 1]] * p2[exps[m, 2]] * q2[exps[m, 3]]


@njit(cache=True, parallel=True)
def _run_batches(
    seed_lo,
    seed_hi,
    traj_offset,
    batch_bounds,
    chi,
    ks,
    tun,
    eps,
    g1,
    g2,
    noise_well,
    noise_amp,
    dt,
    n_steps,
    noise_subdiv,
    save_steps,
    exps,
    init_mode,
    init_a1,
    init_a2,
    sums,
    used,
    diverged,
):
    """Integrate and reduce whole batches.

    Each batch is processed serially in ascending trajectory order and writes
    only its own output slice, so the result is independent of how batches
    are scheduled across threads.
    """
    n_batches = batch_bounds.shape[0] - 1
    n_save = save_steps.shape[0]
    n_mono = exps.shape[0]
    for b in prange(n_batches):
        states = np.empty((LANES, n_save, 2), np.complex128)
        alive = np.empty(LANES, np.bool_)
        bsum = np.zeros((n_save, n_mono), np.complex128)
        p1 = np.empty(5, np.complex128)
        q1 = np.empty(5, np.complex128)
        p2 = np.empty(5, np.complex128)
        q2 = np.empty(5, np.complex128)
        n_used = 0
        n_div = 0
        lo = batch_bounds[b]
        hi = batch_bounds[b + 1]
        for t0 in range(lo, hi, LANES):
            n_active = min(LANES, hi - t0)
            _integrate_block(
                seed_lo,
                seed_hi,
                np.uint64(traj_offset + t0),
                n_active,
                chi,
                ks,
                tun,
                eps,
                g1,
                g2,
                noise_well,
                noise_amp,
                dt,
                n_steps,
                noise_subdiv,
                save_steps,
                init_mode,
                init_a1,
                init_a2,
                states,
                alive,
            )
            for w in range(n_active):
                if not alive[w]:
                    n_div += 1
                    continue
                n_used += 1
                _accumulate_states(states[w], exps, p1, q1, p2, q2, bsum)
        sums[b, :, :] = bsum
        used[b] = n_used
        diverged[b] = n_div


@njit(cache=True)
def _run_single(
    seed_lo,
    seed_hi,
    traj,
    chi,
    ks,
    tun,
    eps,
    g1,
    g2,
    noise_well,
    noise_amp,
    dt,
    n_steps,
    noise_subdiv,
    save_steps,
    init_mode,
    init_a1,
    init_a2,
):
    states = np.empty((save_steps.shape[0], 2), np.complex128)
    div = _integrate_one(
        seed_lo,
        seed_hi,
        np.uint64(traj),
        chi,
        ks,
        tun,
        eps,
        g1,
        g2,
        noise_well,
        noise_amp,
        dt,
        n_steps,
        noise_subdiv,
        save_steps,
        init_mode,
        init_a1,
        init_a2,
        states,
    )
    return states, div
