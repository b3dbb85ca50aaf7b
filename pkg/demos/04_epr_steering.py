"""Inferred-variance (Reid) steering products between the two wells.

Pi V below 1 certifies the EPR paradox: measuring one well lets you predict
both conjugate quadratures of the other better than the vacuum limit allows.
The product is computed from the stored moments for any pair of measurement
angles, so the angle optimization is pure post-processing over one run.

In this model the violations live in the transient (around Jt ~ 2 here);
after pump and loss balance, the angle-optimized product settles above 1.
The demo prints both the time-resolved optimum and the steady value.
"""

import numpy as np

from twdimer import (
    DimerParams,
    SimGrid,
    Topology,
    duan_simon,
    epr_product,
    optimize_epr,
    run_ensemble,
    steady_value,
)

params = DimerParams(chi=1e-2, pump_rate=10.0, loss_rate=1.0,
                     topology=Topology.LOSS_AT_WELL_2)
grid = SimGrid(
    dt=1e-3,
    t_final=20.0,
    save_times=tuple(np.round(np.arange(0, 81) * 0.25, 12)),
    n_traj=50_000,
    n_batches=100,
    master_seed=23,
)
acc = run_ensemble(params, grid)

print("angle-optimized steering product vs time (inferring well 2 from well 1):")
for ti in range(0, 81, 8):
    opt = optimize_epr(acc, 2, angle_grid_size=90, time_index=ti)
    marker = "  <-- EPR steering" if opt.pi_v < 1 else ""
    print(f"  Jt={acc.save_times[ti]:5.2f}  min PiV = {opt.pi_v:.4f}{marker}")

best = min(
    (optimize_epr(acc, w, 180, ti), w, acc.save_times[ti])
    for w in (1, 2)
    for ti in range(len(acc.save_times))
)
opt, w, t = best
series = epr_product(acc, w, opt.theta_i, opt.theta_j)
k = int(np.argmin(np.abs(acc.save_times - t)))
print(f"\nstrongest violation: PiV = {series.values[k]:.4f} +- {series.stderrs[k]:.4f} "
      f"inferring well {w} at Jt={t:.2f}, angles ({opt.theta_i:.3f}, {opt.theta_j:.3f})")

sv = steady_value(series)
print(f"same angles at steady state: PiV = {sv.value:.4f} +- {sv.stderr:.4f}")

ds = steady_value(duan_simon(acc, 0.0))
print(f"\nDuan-Simon sum at theta=0 (separability bound 4): "
      f"{ds.value:.4f} +- {ds.stderr:.4f}")
print("the Reid product is the sharper witness here; the Duan-Simon sum "
      "stays at or above its bound.")
