"""Estimate the six error-bound constants on a few small problems.

Run with ``python3 demos/01_eb_conditions.py``. Each line shows the best
constant found on 1000 samples from the sublevel region ``f - f* <= 1``.
"""

import numpy as np

from ebconv import problems
from ebconv.core import Gradient, ProxGradientResidual, Region
from ebconv.eb import EBKind, SamplePlan, check_condition, draw_samples, estimate_constant

plan = SamplePlan(Region(1.0), 1000, seed=0)
cases = [
    ("quadratic diag(1,4)", problems.make_strongly_convex_quadratic(np.diag([1.0, 4.0]), [0, 0]),
     Gradient()),
    ("least squares A=[1 1]", problems.make_rank_deficient_least_squares([[1.0, 1.0]], [1.0]),
     Gradient()),
    ("lasso A=I, w=1", problems.make_lasso(np.eye(2), [2.0, 0.0], 1.0), ProxGradientResidual(1.0)),
    ("invex x^2 + 3 sin^2 x", problems.make_invex_1d(), Gradient()),
]

for name, model, op in cases:
    samples = draw_samples(model, op, plan)
    ests = {k.value: estimate_constant(model, op, k, samples) for k in EBKind}
    print(f"{name:24s}", "  ".join(f"{k}={v:.4g}" for k, v in ests.items()))

# a claimed constant above the best one fails, with a witness point
model = cases[0][1]
rep = check_condition(model, Gradient(), "cor-eb", 1.5, plan)
print("\ncor-eb at 1.5 on diag(1,4):", rep.to_dict()["verdict"], "witness", np.round(rep.witness, 4))
