"""Measured contraction factors next to their predicted bounds.

Uses the same built-in problem matrix as ``ebconv report``, and shows the
admissible step-size window for the abstract gradient method.
"""

import numpy as np

from ebconv import problems
from ebconv.analysis import measure_rate, predicted_rate, stepsize_window
from ebconv.solvers import SolverConfig, run

quad = problems.make_strongly_convex_quadratic(np.diag([1.0, 4.0]), [0, 0])
rows = [
    ("gd 2/(mu+L)", SolverConfig("gd", (1.0, 1.0), h="2/(mu+L)"), "dist2",
     predicted_rate("gd-strongly-convex", mu=1, L=4)),
    ("gd 1/L, gap", SolverConfig("gd", (1.0, 1.0), h="1/L"), "gap",
     predicted_rate("gd-gap", nu=1, L=4)),
    ("ppa lam=1", SolverConfig("ppa", (1.0, 1.0), lam=1.0), "dist2",
     predicted_rate("ppa", alpha=1, lam=1)),
    ("nesterov", SolverConfig("nesterov", (1.0, 1.0), mu=1.0, L=4.0, max_iter=200,
                              stop_tol=1e-300), "lyapunov",
     predicted_rate("nesterov-smooth", mu=1, L=4)),
]
print(f"{'method':14s} {'metric':9s} {'measured':>9s} {'bound':>9s}")
for name, cfg, metric, pred in rows:
    rate = measure_rate(run(quad, cfg), metric, predicted_tau=pred)
    print(f"{name:14s} {metric:9s} {rate.tau_hat_max:9.4f} {pred:9.4f}  ok={rate.within_prediction}")

# step window for nu=1, beta=1/4 at tau=0.9
for theta in (0.25, 0.5, 0.75):
    w = stepsize_window(theta, 1.0, 0.25, tau=0.9)
    print(f"theta={theta}: h in [{w.lo:.3f}, {w.hi:.3f}] (tau bound {w.tau_bound:.4f})")
