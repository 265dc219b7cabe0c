"""Error bounds on dual objectives of strongly convex primals.

``f(x) = g*(A'x) - b'x`` is smooth but typically not strongly convex. The
growth constant is estimated on nested sublevel levels ``r``; the expected
scaling is flat up to ``r0`` and decays like ``1/sqrt(r)`` after.
"""

import numpy as np

from ebconv.dual import build_dual, elastic_net_pair, quadratic_pair, rho_r, verify_dual_eb

quad = build_dual(quadratic_pair(1.0, m=1), [[1.0], [1.0]], [1.0, 1.0])
rep = verify_dual_eb(quad, 1.0, [0.1, 1.0, 10.0], count=1000)
print(f"quadratic dual: min {quad.critical_set.min_value}, alpha_hat {rep.alpha_hat:.4f}")

A = np.array([[1.0, 0.5], [0.2, 1.0], [0.3, -0.4]])
enet = build_dual(elastic_net_pair(1.0, 1.0), A, A @ np.array([1.5, -2.0]))
rep = verify_dual_eb(enet, 1.0, [0.1, 1.0, 10.0, 100.0], count=1000)
for e in rep.to_dict()["entries"]:
    print(f"elastic-net dual r={e['r']:>6}: nu_hat {e['nu_hat']:.4f}  rho_r {rho_r(e['r'], 1.0):.4f}")
