"""Dual objectives ``f(x) = g*(A'x) - <b, x>`` of strongly convex primals.

For ``min g(y) s.t. Ay = b`` with ``g`` strongly convex (modulus ``c``) the
dual objective is smooth with ``L = ||A||^2 / c`` and its minimizers are
exactly ``{x : grad g*(A'x) = y_bar}``, where ``y_bar`` is the unique primal
solution. When ``dg(y_bar)`` is a single point this is an affine set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import AffineSet, Gradient, ObjectiveModel, Region, soft_threshold
from .eb import SamplePlan, draw_samples

__all__ = [
    "ConjugatePair",
    "quadratic_pair",
    "elastic_net_pair",
    "DualModel",
    "build_dual",
    "dual_from_params",
    "fenchel_young_gap",
    "DualEBReport",
    "rho_r",
    "verify_dual_eb",
]


@dataclass(frozen=True)
class ConjugatePair:
    """A strongly convex ``g`` with its conjugate and conjugate gradient.

    ``subgradient_at`` returns the unique element of ``dg(y)`` or ``None``
    when the subdifferential is not a single point.
    """

    g_value: Callable[[np.ndarray], float]
    c: float
    g_conj_value: Callable[[np.ndarray], float]
    g_conj_grad: Callable[[np.ndarray], np.ndarray]
    subgradient_at: Callable[[np.ndarray], np.ndarray | None]
    y_bar: np.ndarray | None = None
    kind: str = "custom"
    y0: np.ndarray | None = None

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("strong convexity modulus c must be positive")


def quadratic_pair(c: float = 1.0, y0=None, m: int | None = None) -> ConjugatePair:
    """``g(y) = (c/2)||y - y0||^2``; ``g*(z) = <z, y0> + ||z||^2/(2c)``."""
    c = float(c)
    if y0 is None:
        if m is None:
            raise ValueError("give y0 or the primal dimension m")
        y0 = np.zeros(m)
    y0 = np.array(y0, dtype=np.float64).reshape(-1)
    return ConjugatePair(
        g_value=lambda y: 0.5 * c * float((y - y0) @ (y - y0)),
        c=c,
        g_conj_value=lambda z: float(z @ y0) + float(z @ z) / (2 * c),
        g_conj_grad=lambda z: y0 + z / c,
        subgradient_at=lambda y: c * (np.asarray(y) - y0),
        kind="quadratic",
        y0=y0,
    )


def elastic_net_pair(c: float = 1.0, w: float = 1.0) -> ConjugatePair:
    """``g(y) = (c/2)||y||^2 + w||y||_1``; ``grad g*(z) = S_w(z) / c``."""
    c, w = float(c), float(w)
    if w < 0:
        raise ValueError("l1 weight must be nonnegative")

    def sub(y):
        y = np.asarray(y, dtype=np.float64)
        if w > 0 and np.any(y == 0):
            return None
        return c * y + w * np.sign(y)

    def conj(z):
        s = soft_threshold(z, w)
        return float(s @ s) / (2 * c)

    return ConjugatePair(
        g_value=lambda y: 0.5 * c * float(y @ y) + w * float(np.abs(y).sum()),
        c=c,
        g_conj_value=conj,
        g_conj_grad=lambda z: soft_threshold(z, w) / c,
        subgradient_at=sub,
        kind="elastic_net",
    )


def fenchel_young_gap(pair: ConjugatePair, y, z) -> float:
    """``g(y) + g*(z) - <y, z>``: nonnegative, zero iff ``z`` is a subgradient at ``y``."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return pair.g_value(y) + pair.g_conj_value(z) - float(y @ z)


@dataclass(frozen=True, eq=False)
class DualModel(ObjectiveModel):
    """Dual objective together with the data it was built from."""

    pair: ConjugatePair | None = None
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    y_bar: np.ndarray | None = None

    def characterization_residual(self, x) -> float:
        """``||grad g*(A'x) - y_bar||``; zero exactly on the minimizers."""
        x = np.asarray(x, dtype=np.float64)
        return float(np.linalg.norm(self.pair.g_conj_grad(self.A.T @ x) - self.y_bar))


def _primal_solution(pair: ConjugatePair, A, b) -> np.ndarray:
    if pair.y_bar is not None:
        return np.array(pair.y_bar, dtype=np.float64)
    n, m = A.shape
    if np.linalg.matrix_rank(A) == m:
        y, *_ = np.linalg.lstsq(A, b, rcond=None)
        return y
    if pair.kind == "quadratic":
        # projection of the unconstrained minimizer onto {Ay = b}
        return pair.y0 - np.linalg.pinv(A) @ (A @ pair.y0 - b)
    raise ValueError("primal solution needed: supply y_bar or use A of full column rank")


def build_dual(pair: ConjugatePair, A, b, name: str = "dual") -> DualModel:
    """Dual objective of ``min g(y) s.t. Ay = b``.

    Raises
    ------
    ValueError
        If ``b`` is not in the range of ``A``, if ``A`` has more columns than
        rows, or if ``dg(y_bar)`` is not a single point (the solution set
        would not be affine).
    """
    A = np.atleast_2d(np.array(A, dtype=np.float64))
    n, m = A.shape
    if m > n:
        raise ValueError(f"A must be n x m with m <= n, got {n} x {m}")
    b = np.array(b, dtype=np.float64).reshape(-1)
    if b.size != n:
        raise ValueError("b has the wrong length")
    y_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.linalg.norm(A @ y_ls - b) > 1e-10:
        raise ValueError("b is not in the range of A")
    y_bar = _primal_solution(pair, A, b)
    s = pair.subgradient_at(y_bar)
    if s is None:
        raise ValueError("the subdifferential at the primal solution is not a single point")
    L = float(np.linalg.norm(A, 2)) ** 2 / pair.c
    conj, conj_grad = pair.g_conj_value, pair.g_conj_grad

    def value(x):
        return conj(A.T @ x) - float(b @ x)

    def grad(x):
        return A @ conj_grad(A.T @ x) - b

    crit = AffineSet(A.T, s)
    crit = AffineSet(A.T, s, min_value=value(crit.anchor))
    return DualModel(
        dim=n,
        smooth_value=value,
        smooth_gradient=grad,
        smooth_lipschitz=L,
        critical_set=crit,
        name=name,
        pair=pair,
        A=A,
        b=b,
        y_bar=y_bar,
    )


def dual_from_params(params) -> DualModel:
    """Build a dual model from JSON parameters.

    ``{"pair": "quadratic", "c": 1, "y0": [...], "A": [[...]], "b": [...]}`` or
    ``{"pair": "elastic_net", "c": 1, "w": 1, "A": ..., "b": ...}``; an
    optional ``"y_bar"`` overrides the primal solution.
    """
    kind = params.get("pair", "quadratic")
    A = np.atleast_2d(np.array(params["A"], dtype=np.float64))
    c = float(params.get("c", 1.0))
    if kind == "quadratic":
        pair = quadratic_pair(c, params.get("y0"), m=A.shape[1])
    elif kind == "elastic_net":
        pair = elastic_net_pair(c, float(params.get("w", 1.0)))
    else:
        raise ValueError(f"unknown conjugate pair {kind!r}")
    if params.get("y_bar") is not None:
        from dataclasses import replace

        pair = replace(pair, y_bar=np.array(params["y_bar"], dtype=np.float64))
    return build_dual(pair, A, params["b"])


# ---------------------------------------------------------------------------
# EB on sublevel sets


def rho_r(r: float, r0: float, r1: float | None = None) -> float:
    """Scaling ``rho_r``: 1 for ``r <= r0``, ``sqrt(r1 / r)`` beyond (``r1 = r0/2`` by default)."""
    if r1 is None:
        r1 = r0 / 2
    if not 0 < r1 < r0:
        raise ValueError("need 0 < r1 < r0")
    return 1.0 if r <= r0 else math.sqrt(r1 / r)


@dataclass(frozen=True)
class DualEBReport:
    alpha_hat: float
    r0: float
    r1: float
    r_grid: tuple
    nu_hat: tuple
    rho: tuple
    ratio: tuple
    samples_used: int
    min_ratio: float = 0.9

    @property
    def alpha_positive(self) -> bool:
        return self.alpha_hat > 0

    @property
    def nu_positive(self) -> bool:
        return all(v > 0 for v in self.nu_hat)

    @property
    def nu_non_increasing(self) -> bool:
        order = np.argsort(self.r_grid)
        nus = np.array(self.nu_hat)[order]
        return bool(np.all(np.diff(nus) <= 0))

    @property
    def ratios_ok(self) -> bool:
        return all(q >= self.min_ratio for q in self.ratio)

    @property
    def passed(self) -> bool:
        return self.alpha_positive and self.nu_positive and self.ratios_ok

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "r0": self.r0,
            "r1": self.r1,
            "entries": [
                {"r": r, "nu_hat": v, "rho_r": p, "ratio": q, "ok": q >= self.min_ratio}
                for r, v, p, q in zip(self.r_grid, self.nu_hat, self.rho, self.ratio)
            ],
            "samples_used": self.samples_used,
            "passed": self.passed,
        }


def verify_dual_eb(model: ObjectiveModel, r0: float, r_grid: Sequence[float], *,
                   count: int = 1000, seed: int = 0,
                   strategy: str = "gaussian-rejection") -> DualEBReport:
    """Estimate obj-EB on ``X_{r0}`` and cor-EB on each ``X_r``.

    Samples drawn for every level are pooled, and each ``nu_hat_r`` is the
    worst cor-EB ratio over all pooled samples lying in ``X_r``. Nested
    sublevel sets then give estimates that cannot increase with ``r``. The
    report compares ``8 nu_hat_r / (alpha_hat rho_r^2)`` against 0.9.
    """
    if not r0 > 0 or any(not r > 0 for r in r_grid):
        raise ValueError("sublevel offsets must be positive")
    levels = sorted(set([float(r0)] + [float(r) for r in r_grid]))
    pooled = []
    for i, r in enumerate(levels):
        plan = SamplePlan(Region(r), count, seed + i, strategy)
        pooled.append(draw_samples(model, Gradient(), plan))
    d = np.concatenate([s.d for s in pooled])
    gap = np.concatenate([s.gap for s in pooled])
    inner = np.concatenate([s.inner for s in pooled])
    informative = d > 1e-8
    if not informative.any():
        raise ValueError("degenerate sampling: every sample is critical")

    def worst(mask, lhs, rhs):
        mask = mask & informative & (rhs > 1e-16)
        if not mask.any():
            raise ValueError("degenerate sampling: no informative samples in the region")
        return float(np.min(lhs[mask] / rhs[mask]))

    alpha_hat = worst(gap <= r0, gap, 0.5 * d**2)
    r1 = r0 / 2
    nus, rhos, ratios = [], [], []
    for r in r_grid:
        nu = worst(gap <= r, inner, d**2)
        rho = rho_r(r, r0, r1)
        nus.append(nu)
        rhos.append(rho)
        ratios.append(8 * nu / (alpha_hat * rho**2))
    return DualEBReport(alpha_hat, float(r0), r1, tuple(float(r) for r in r_grid),
                        tuple(nus), tuple(rhos), tuple(ratios), int(d.size))
