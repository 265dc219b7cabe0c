"""Composite bounds, block updates and accelerated iterations.

The box-constrained l1 problem satisfies the composite bound with
``mu = 1/9`` and fails at ``mu = 0.5``; a smooth outer map with a
non-injective inner map fails for every ``mu``. PALM on a two-block
least-squares problem and accelerated FBS on a kinked 1-D objective follow.
"""

from ebconv import problems
from ebconv.eb import PairGrid, check_composite_eb
from ebconv.solvers import SolverConfig, bisect_theta, run

box = problems.make_box_l1_scalar()
grid = PairGrid.box(-2, 2, -4, 4, 0.05)
for mu in (1 / 9, 0.5):
    rep = check_composite_eb(box, mu, 1.0, grid)
    print(f"box l1, mu={mu:.4f}: {rep.to_dict()['verdict']} worst ratio {rep.worst_ratio:.4f}")

ce = problems.make_composite_counterexample()
rep = check_composite_eb(ce, 1e-3, 2.0, PairGrid.box(-1, 1, -1, 1, 0.25, dim=2))
print("counterexample, mu=1e-3:", rep.to_dict()["verdict"], "at", rep.witness)

palm_p = problems.make_palm_problem([[1.0, 1.0]], [1.0], [1, 1], ["zero", "zero"])
trace = run(palm_p, SolverConfig("palm", (0.0, 0.0)))
print(f"\npalm: {trace.status} after {trace.iterations} sweep(s), x = {trace.x[-1]}")

desk = problems.make_composite_desk(0.25)
trace = run(desk, SolverConfig("nesterov", (1.9,), mu=0.25, L=10.0, max_iter=300,
                               stop_tol=1e-300))
theta, rho = bisect_theta(trace, 0.25, 10.0)
print(f"accelerated fbs on the desk: smallest theta {theta:.4f}, Lyapunov factor {rho:.4f}")
