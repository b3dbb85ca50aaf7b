"""The exactly solvable sector: chi = 0.

The linear pumped and damped dimer maps vacuum noise onto vacuum noise, so
every quadrature variance is 1, all cumulants vanish and the steering
product is exactly 1.  This run is the cheapest way to see the estimator
machinery (batch means, standard errors, angle optimization) on a case with
known answers.
"""

import numpy as np

from twdimer import (
    DimerParams,
    QuadratureSpec,
    SimGrid,
    kappa3,
    kappa4,
    mean_amplitude,
    optimize_epr,
    population,
    quad_variance,
    run_ensemble,
    steady_value,
)

params = DimerParams(chi=0.0, pump_rate=10.0, loss_rate=1.0)
grid = SimGrid(
    dt=1e-3,
    t_final=20.0,
    save_times=tuple(np.round(np.arange(0, 41) * 0.5, 12)),
    n_traj=20_000,
    n_batches=100,
    master_seed=7,
)
acc = run_ensemble(params, grid)

sv = steady_value(mean_amplitude(acc, 1, "re"))
print(f"steady Re<a1> = {sv.value:.4f} +- {sv.stderr:.4f}   (exact: 10)")
sv = steady_value(mean_amplitude(acc, 2, "im"))
print(f"steady Im<a2> = {sv.value:.4f} +- {sv.stderr:.4f}   (exact: 10)")
for w in (1, 2):
    sv = steady_value(population(acc, w))
    print(f"steady population well {w} = {sv.value:.3f} +- {sv.stderr:.3f}   (exact: 100)")

sv = steady_value(quad_variance(acc, QuadratureSpec(1, 0.3)))
print(f"steady V(X1(0.3)) = {sv.value:.4f} +- {sv.stderr:.4f}   (exact: 1)")

for w in (1, 2):
    sv = steady_value(kappa3(acc, QuadratureSpec(w, 0.0)))
    print(f"steady kappa3 well {w} = {sv.value:+.4f} +- {sv.stderr:.4f}   (exact: 0)")
    sv = steady_value(kappa4(acc, QuadratureSpec(w, 0.0)))
    print(f"steady kappa4 well {w} = {sv.value:+.4f} +- {sv.stderr:.4f}   (exact: 0)")

opt = optimize_epr(acc, 1)
print(f"optimized steering product: {opt.pi_v:.4f} at angles "
      f"({opt.theta_i:.3f}, {opt.theta_j:.3f})   (exact: 1, no steering)")
