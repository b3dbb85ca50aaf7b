"""A first look at single phase-space trajectories.

Each trajectory carries a pair of complex amplitudes (alpha1, alpha2).  With
the noise switched off and chi = 0 the dynamics is an exactly solvable
linear system whose fixed point is alpha1 = eps*gamma/J^2, alpha2 = i*eps/J;
with noise on, the damped well is continuously kicked by vacuum
fluctuations and single trajectories scatter around the mean.
"""

import numpy as np

from twdimer import DimerParams, SimGrid, WignerState, integrate_trajectory

params = DimerParams(chi=0.0, pump_rate=10.0, loss_rate=1.0)
grid = SimGrid(
    dt=1e-3,
    t_final=20.0,
    save_times=tuple(float(t) for t in range(21)),
    n_traj=8,
    n_batches=2,
    master_seed=2026,
)

print("deterministic skeleton (noise off), starting from the empty dimer:")
out = integrate_trajectory(params, grid, 0, with_noise=False,
                           initial_state=WignerState(0j, 0j))
for t, (a1, a2) in zip(grid.save_times[::5], out.states[::5]):
    print(f"  Jt={t:5.1f}  alpha1={a1:+.3f}  alpha2={a2:+.3f}")
print(f"  fixed point: alpha1 -> 10, alpha2 -> 10i")

print("\nfour noisy trajectories at Jt = 20 (same physics, different noise):")
for k in range(4):
    out = integrate_trajectory(params, grid, k)
    a1, a2 = out.states[-1]
    print(f"  traj {k}: alpha1={a1:+.3f}  alpha2={a2:+.3f}  diverged={out.diverged}")

print("\nre-running trajectory 0 reproduces it bit for bit:")
again = integrate_trajectory(params, grid, 0)
first = integrate_trajectory(params, grid, 0)
print(f"  identical: {np.array_equal(again.states, first.states)}")
