"""From an observed linear rate back to an error-bound constant.

Run a method, read off the worst per-step contraction, convert it to the
constant it forces and re-check that constant on fresh samples. A method
that converges only sublinearly (``x^4``) is reported as not applicable.
"""

import numpy as np

from ebconv import problems
from ebconv.analysis import implied_constant, measure_rate, necessity_check
from ebconv.core import Region
from ebconv.eb import SamplePlan
from ebconv.solvers import SolverConfig, run

quad = problems.make_strongly_convex_quadratic(np.diag([1.0, 4.0]), [0, 0])
trace = run(quad, SolverConfig("gd", (1.0, 1.0), h=0.25))
tau = measure_rate(trace).tau_hat_max
c = implied_constant("gd", tau, L=4.0)
rep = necessity_check(quad, "gd", tau, {"L": 4.0}, SamplePlan(Region(float(trace.gap[0])), 1000))
print(f"gd h=0.25: tau={tau:.4f} implies cor-eb constant {c:.4f} -> {rep.to_dict()['verdict']}")

half = problems.make_strongly_convex_quadratic([[1.0]], [0.0])
trace = run(half, SolverConfig("ppa", (1.0,), lam=1.0))
tau = measure_rate(trace).tau_hat_max
print(f"ppa lam=1:  tau={tau:.4f} implies {implied_constant('ppa', tau, lam=1.0):.4f}")

quartic = problems.make_quartic_1d()
trace = run(quartic, SolverConfig("gd", (1.0,), h=0.1, max_iter=2000))
# sublinear: the tolerance is never reached, so no rate is read off
if trace.status != "converged":
    print(f"quartic: {trace.status} after {trace.iterations} iterations, necessity not applicable")
