"""Objective models, critical-set geometry and residual measure operators.

Everything else in the package consumes the types defined here. Models are
immutable once built and every function in this module is pure.

A composite objective is ``phi = f + g`` where ``f`` is smooth (value,
gradient and a Lipschitz modulus of the gradient) and ``g`` is a separable
"simple" part made of weighted absolute values and interval indicators. The
separable restriction is what makes the least-norm subgradient and the
proximal map exact and cheap.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "MalformedModelError",
    "OutsideDomain",
    "UnsupportedComposite",
    "as_point",
    "soft_threshold",
    "SeparablePart",
    "Block",
    "AffineSet",
    "SinglePoint",
    "FiniteSet",
    "NumericOracle",
    "Region",
    "ObjectiveModel",
    "CompositeModel",
    "Gradient",
    "LeastNormSubgradient",
    "ProxGradientResidual",
    "MoreauGradient",
    "CompositeG",
    "operator_name",
    "evaluate",
    "distance_to_critical",
    "project_to_critical",
    "residual",
    "prox_linearized",
    "objective_prox",
    "moreau_envelope",
    "reference_minimizer",
    "RESIDUAL_ZERO_TOL",
]

#: Absolute tolerance under which a residual counts as zero.
RESIDUAL_ZERO_TOL = 1e-9


class MalformedModelError(ValueError):
    """A model produced a non-finite smooth value or violates its invariants."""


class OutsideDomain(ValueError):
    """The subdifferential is empty at the requested point.

    Stands in for the convention that the least-norm subgradient has
    infinite norm outside ``dom dphi``.
    """


class UnsupportedComposite(ValueError):
    """Composite structure outside the family with a closed-form subproblem."""


def as_point(x) -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array (a copy)."""
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("a point needs at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite coordinates")
    return arr


def soft_threshold(x, thresh):
    """Componentwise ``sign(x) * max(|x| - thresh, 0)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


# ---------------------------------------------------------------------------
# separable simple part


@dataclass(frozen=True, eq=False)
class SeparablePart:
    """``g(x) = sum_i w_i |x_i| + indicator(lower_i <= x_i <= upper_i)``.

    A zero weight with infinite bounds gives the zero function on that
    coordinate, so this covers zero, l1, box and l1-plus-box parts and any
    coordinatewise mixture of them.
    """

    weight: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float64).reshape(-1)
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if not (w.shape == lo.shape == hi.shape):
            raise ValueError("weight/lower/upper must have the same length")
        if np.any(w < 0) or np.any(~np.isfinite(w)):
            raise ValueError("l1 weights must be finite and nonnegative")
        if np.any(lo > hi):
            raise ValueError("empty interval in box constraint")
        for a in (w, lo, hi):
            a.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def zero(cls, n: int) -> "SeparablePart":
        return cls(np.zeros(n), np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def l1(cls, n: int, w: float) -> "SeparablePart":
        return cls(np.full(n, float(w)), np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def box(cls, n: int, lo: float, hi: float) -> "SeparablePart":
        return cls(np.zeros(n), np.full(n, float(lo)), np.full(n, float(hi)))

    @classmethod
    def l1_box(cls, n: int, w: float, lo: float, hi: float) -> "SeparablePart":
        return cls(np.full(n, float(w)), np.full(n, float(lo)), np.full(n, float(hi)))

    @classmethod
    def concat(cls, parts: Sequence["SeparablePart"]) -> "SeparablePart":
        return cls(
            np.concatenate([p.weight for p in parts]),
            np.concatenate([p.lower for p in parts]),
            np.concatenate([p.upper for p in parts]),
        )

    @property
    def size(self) -> int:
        return self.weight.size

    @functools.cached_property
    def is_zero(self) -> bool:
        return bool(
            np.all(self.weight == 0)
            and np.all(np.isneginf(self.lower))
            and np.all(np.isposinf(self.upper))
        )

    def _slice(self, idx):
        return self.weight[idx], self.lower[idx], self.upper[idx]

    def value(self, x, idx=slice(None)) -> float:
        w, lo, hi = self._slice(idx)
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < lo) or np.any(x > hi):
            return np.inf
        return float(np.sum(w * np.abs(x)))

    def prox(self, x, t: float, idx=slice(None)) -> np.ndarray:
        """``argmin_u g(u) + ||u - x||^2 / (2t)``, restricted to ``idx``."""
        w, lo, hi = self._slice(idx)
        return np.clip(soft_threshold(x, t * w), lo, hi)

    def subdifferential(self, x):
        """Per-coordinate subdifferential intervals ``(a, b)``, or ``None``.

        ``None`` means ``x`` lies outside the domain, where the
        subdifferential is empty.
        """
        x = np.asarray(x, dtype=np.float64)
        w, lo, hi = self.weight, self.lower, self.upper
        if np.any(x < lo) or np.any(x > hi):
            return None
        s = np.sign(x)
        a = np.where(x == 0, -w, w * s)
        b = np.where(x == 0, w, w * s)
        # normal cone of the interval at active bounds
        a = np.where(x == lo, -np.inf, a)
        b = np.where(x == hi, np.inf, b)
        return a, b

    def least_norm_subgradient(self, x):
        sub = self.subdifferential(x)
        if sub is None:
            return None
        a, b = sub
        return np.clip(0.0, a, b)


@dataclass(frozen=True)
class Block:
    """One coordinate block for PALM: ``x[offset:offset+length]``."""

    offset: int
    length: int
    lipschitz: float

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


# ---------------------------------------------------------------------------
# critical sets


class _CriticalSet:
    min_value: float

    def distance(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x) - self.project(x)))

    def project(self, x) -> np.ndarray:
        return self.nearest(x)[0]

    def nearest(self, x) -> list[np.ndarray]:
        """All nearest points of the set (only FiniteSet can return several)."""
        raise NotImplementedError

    def points(self) -> list[np.ndarray]:
        """A few representative members, used for anchoring and checks."""
        raise NotImplementedError

    @property
    def is_singleton(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class AffineSet(_CriticalSet):
    """``{x : M x = c}`` for a consistent linear system."""

    M: np.ndarray
    c: np.ndarray
    min_value: float = 0.0

    def __post_init__(self):
        M = np.atleast_2d(np.array(self.M, dtype=np.float64))
        c = np.array(self.c, dtype=np.float64).reshape(-1)
        if M.shape[0] != c.size:
            raise ValueError("AffineSet: M rows and c length differ")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "min_value", float(self.min_value))
        if np.linalg.norm(M @ self.anchor - c) > 1e-8 * max(1.0, np.linalg.norm(c)):
            raise ValueError("AffineSet: the system M x = c is inconsistent")

    @functools.cached_property
    def pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.M)

    @functools.cached_property
    def anchor(self) -> np.ndarray:
        return self.pinv @ self.c

    @functools.cached_property
    def null_basis(self) -> np.ndarray:
        _, s, vt = np.linalg.svd(self.M)
        tol = max(self.M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        rank = int(np.sum(s > tol))
        return vt[rank:].T

    @property
    def is_singleton(self) -> bool:
        return self.null_basis.shape[1] == 0

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x - self.pinv @ (self.M @ x - self.c)

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(np.linalg.norm(self.pinv @ (self.M @ x - self.c)))

    def nearest(self, x):
        return [self.project(x)]

    def points(self):
        pts = [self.anchor.copy()]
        for v in self.null_basis.T[:2]:
            pts.append(self.anchor + v)
        return pts


@dataclass(frozen=True, eq=False)
class SinglePoint(_CriticalSet):
    x_star: np.ndarray
    min_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x_star", as_point(self.x_star))
        object.__setattr__(self, "min_value", float(self.min_value))

    def project(self, x):
        return self.x_star.copy()

    def distance(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=np.float64) - self.x_star))

    def nearest(self, x):
        return [self.x_star.copy()]

    def points(self):
        return [self.x_star.copy()]

    @property
    def is_singleton(self) -> bool:
        return True


@dataclass(frozen=True, eq=False)
class FiniteSet(_CriticalSet):
    """Finitely many critical points; ties resolve to the lexicographic minimum."""

    points_: tuple
    min_value: float = 0.0

    def __post_init__(self):
        pts = tuple(as_point(p) for p in self.points_)
        if not pts:
            raise ValueError("FiniteSet needs at least one point")
        object.__setattr__(self, "points_", pts)
        object.__setattr__(self, "min_value", float(self.min_value))

    def nearest(self, x, rtol: float = 1e-12):
        x = np.asarray(x, dtype=np.float64)
        d = np.array([np.linalg.norm(x - p) for p in self.points_])
        dmin = d.min()
        ties = [p for p, di in zip(self.points_, d) if di <= dmin * (1 + rtol) + 1e-300]
        ties.sort(key=lambda p: tuple(p))
        return [p.copy() for p in ties]

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(min(np.linalg.norm(x - p) for p in self.points_))

    def points(self):
        return [p.copy() for p in self.points_]

    @property
    def is_singleton(self) -> bool:
        return len(self.points_) == 1


@dataclass(frozen=True, eq=False)
class NumericOracle(_CriticalSet):
    """Reference minimizer obtained by a high-accuracy solve."""

    x_ref: np.ndarray | None
    solve_tolerance: float
    min_value: float = 0.0

    def __post_init__(self):
        if self.x_ref is not None:
            object.__setattr__(self, "x_ref", as_point(self.x_ref))
        object.__setattr__(self, "min_value", float(self.min_value))

    def _ref(self):
        if self.x_ref is None:
            raise ValueError("NumericOracle: reference minimizer not solved")
        return self.x_ref

    def project(self, x):
        return self._ref().copy()

    def distance(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=np.float64) - self._ref()))

    def nearest(self, x):
        return [self._ref().copy()]

    def points(self):
        return [self._ref().copy()]

    @property
    def is_singleton(self) -> bool:
        return True


@dataclass(frozen=True)
class Region:
    """Sublevel region ``{x : phi(x) <= min phi + r}``, optionally restricted."""

    level_offset: float
    domain_restriction: Callable[[np.ndarray], bool] | None = None

    def __post_init__(self):
        if not self.level_offset >= 0:
            raise ValueError("level offset must be nonnegative")

    def contains(self, model, x) -> bool:
        val = model.value(x)
        if not np.isfinite(val):
            return False
        if val > model.critical_set.min_value + self.level_offset:
            return False
        return self.domain_restriction is None or bool(self.domain_restriction(x))


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True, eq=False)
class ObjectiveModel:
    """Composite objective ``phi = f + g``.

    Parameters
    ----------
    dim : int
        Number of coordinates.
    smooth_value, smooth_gradient : callable
        Value and gradient of the smooth part ``f``.
    smooth_lipschitz : float
        Lipschitz modulus ``L`` of ``grad f``.
    critical_set : AffineSet, SinglePoint, FiniteSet or NumericOracle
        Description of ``crit phi`` together with ``min phi``.
    simple : SeparablePart, optional
        The simple part ``g``; zero when omitted.
    blocks : sequence of Block, optional
        Coordinate partition with block Lipschitz moduli (PALM).
    strong_convexity : float, optional
        ``mu`` when known.
    smooth_prox : callable, optional
        ``(x, lam) -> prox_{lam f}(x)``; enables the Moreau gradient and PPA
        when ``g`` is zero.
    smooth_is_zero : bool
        Marks ``f = 0`` so that the prox of ``phi`` is the prox of ``g``.
    """

    dim: int
    smooth_value: Callable[[np.ndarray], float]
    smooth_gradient: Callable[[np.ndarray], np.ndarray]
    smooth_lipschitz: float
    critical_set: _CriticalSet
    simple: SeparablePart | None = None
    blocks: tuple | None = None
    strong_convexity: float | None = None
    smooth_prox: Callable[[np.ndarray, float], np.ndarray] | None = None
    smooth_is_zero: bool = False
    convex: bool = True
    name: str = "model"
    expected_constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise MalformedModelError("dimension must be at least 1")
        if not (self.smooth_lipschitz > 0 and np.isfinite(self.smooth_lipschitz)):
            raise MalformedModelError("smooth_lipschitz must be positive and finite")
        if self.simple is None:
            object.__setattr__(self, "simple", SeparablePart.zero(self.dim))
        elif self.simple.size != self.dim:
            raise MalformedModelError("simple part has the wrong dimension")
        if self.strong_convexity is not None and not self.strong_convexity > 0:
            raise MalformedModelError("strong convexity modulus must be positive")
        if self.blocks is not None:
            blocks = tuple(self.blocks)
            pos = 0
            for b in blocks:
                if b.offset != pos or b.length < 1:
                    raise MalformedModelError("blocks must partition [0, n) in order")
                if not b.lipschitz > 0:
                    raise MalformedModelError("block Lipschitz moduli must be positive")
                pos += b.length
            if pos != self.dim:
                raise MalformedModelError("blocks must partition [0, n) exactly")
            object.__setattr__(self, "blocks", blocks)

    # accessors for the simple part
    def simple_value(self, x) -> float:
        return self.simple.value(x)

    def simple_prox(self, x, t: float) -> np.ndarray:
        return self.simple.prox(x, t)

    def simple_least_norm_subgradient(self, x):
        return self.simple.least_norm_subgradient(x)

    @property
    def is_smooth(self) -> bool:
        """True when the simple part is identically zero."""
        return self.simple.is_zero

    def value(self, x) -> float:
        return evaluate(self, x)


@dataclass(frozen=True, eq=False)
class CompositeModel:
    """``phi(x) = h(e(x)) + g(x)`` with outer ``h`` identity or half squared norm.

    Only two closed-form subproblem families are supported: ``m = 1`` with
    ``h(t) = t`` (any smooth ``e``, separable ``g``) and ``h = 0.5||.||^2``
    with affine ``e`` and ``g = 0``. Max-type outer functions are rejected.
    """

    dim: int
    inner: Callable[[np.ndarray], np.ndarray]
    inner_jacobian: Callable[[np.ndarray], np.ndarray]
    outer: str
    critical_set: _CriticalSet
    simple: SeparablePart | None = None
    inner_affine: bool = False
    name: str = "composite"

    def __post_init__(self):
        if self.outer not in ("identity", "half_sq_norm"):
            raise UnsupportedComposite(f"outer function {self.outer!r} is not supported")
        if self.simple is None:
            object.__setattr__(self, "simple", SeparablePart.zero(self.dim))
        if self.outer == "half_sq_norm" and not (self.inner_affine and self.simple.is_zero):
            raise UnsupportedComposite(
                "half squared norm outer needs an affine inner map and g = 0"
            )

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        e = np.asarray(self.inner(x), dtype=np.float64)
        if self.outer == "identity":
            if e.size != 1:
                raise UnsupportedComposite("identity outer needs a scalar inner map")
            h = float(e.reshape(()))
        else:
            h = 0.5 * float(e @ e)
        if not np.isfinite(h):
            raise MalformedModelError("non-finite inner value")
        return h + self.simple.value(x)


# ---------------------------------------------------------------------------
# residual operator kinds


@dataclass(frozen=True)
class Gradient:
    pass


@dataclass(frozen=True)
class LeastNormSubgradient:
    pass


@dataclass(frozen=True)
class ProxGradientResidual:
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("prox-gradient step t must be positive")


@dataclass(frozen=True)
class MoreauGradient:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("Moreau parameter must be positive")


@dataclass(frozen=True)
class CompositeG:
    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("composite gradient mapping needs L > 0")


def operator_name(kind) -> str:
    """Stable string label used in reports."""
    if isinstance(kind, Gradient):
        return "gradient"
    if isinstance(kind, LeastNormSubgradient):
        return "least-norm"
    if isinstance(kind, ProxGradientResidual):
        return f"prox-grad(t={kind.t!r})"
    if isinstance(kind, MoreauGradient):
        return f"moreau(lam={kind.lam!r})"
    if isinstance(kind, CompositeG):
        return f"composite(L={kind.L!r})"
    raise TypeError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# operations


def evaluate(model, x) -> float:
    """Return ``f(x) + g(x)``; ``inf`` outside ``dom g``."""
    if isinstance(model, CompositeModel):
        return model.value(x)
    x = np.asarray(x, dtype=np.float64)
    fval = float(model.smooth_value(x))
    if not np.isfinite(fval):
        raise MalformedModelError(f"{model.name}: smooth value is not finite at {x}")
    return fval + model.simple.value(x)


def distance_to_critical(model, x) -> float:
    return model.critical_set.distance(np.asarray(x, dtype=np.float64))


def project_to_critical(model, x) -> np.ndarray:
    return model.critical_set.project(np.asarray(x, dtype=np.float64))


def _grad(model, x) -> np.ndarray:
    g = np.asarray(model.smooth_gradient(x), dtype=np.float64).reshape(-1)
    if g.shape != x.shape:
        raise MalformedModelError(f"{model.name}: gradient has the wrong shape")
    return g


def objective_prox(model, x, lam: float) -> np.ndarray:
    """``prox_{lam phi}(x)`` when one of the two parts is identically zero."""
    x = np.asarray(x, dtype=np.float64)
    if model.smooth_is_zero:
        return model.simple.prox(x, lam)
    if model.simple.is_zero and model.smooth_prox is not None:
        return np.asarray(model.smooth_prox(x, lam), dtype=np.float64)
    raise ValueError(f"{model.name}: no proximal map available for the full objective")


def _check_prox_step(model, t: float):
    if t > (1.0 / model.smooth_lipschitz) * (1 + 1e-12):
        raise ValueError(
            f"prox-gradient step t={t} exceeds 1/L={1.0 / model.smooth_lipschitz}"
        )


def prox_gradient_point(model, x, t: float) -> np.ndarray:
    """Forward-backward point ``prox_{tg}(x - t grad f(x))``."""
    return model.simple.prox(x - t * _grad(model, x), t)


def residual(model, kind, x) -> np.ndarray:
    """Evaluate the residual measure operator ``kind`` at ``x``.

    Raises
    ------
    OutsideDomain
        For the least-norm subgradient when the subdifferential is empty.
    """
    x = np.asarray(x, dtype=np.float64)
    if isinstance(kind, CompositeG):
        return kind.L * (x - prox_linearized(model, kind.L, x))
    if isinstance(model, CompositeModel):
        raise ValueError("composite models only support the CompositeG operator")
    if isinstance(kind, Gradient):
        return _grad(model, x)
    if isinstance(kind, LeastNormSubgradient):
        grad = _grad(model, x)
        sub = model.simple.subdifferential(x)
        if sub is None:
            raise OutsideDomain(f"{model.name}: subdifferential empty at {x}")
        a, b = sub
        return grad + np.clip(-grad, a, b)
    if isinstance(kind, ProxGradientResidual):
        _check_prox_step(model, kind.t)
        return (x - prox_gradient_point(model, x, kind.t)) / kind.t
    if isinstance(kind, MoreauGradient):
        return (x - objective_prox(model, x, kind.lam)) / kind.lam
    raise TypeError(f"unknown operator kind {kind!r}")


def prox_linearized(model, L: float, y) -> np.ndarray:
    """Minimizer ``p(y)`` of the linearized model plus ``L/2 ||x - y||^2``."""
    if not L > 0:
        raise ValueError("L must be positive")
    y = np.asarray(y, dtype=np.float64)
    if isinstance(model, ObjectiveModel):
        return model.simple.prox(y - _grad(model, y) / L, 1.0 / L)
    if not isinstance(model, CompositeModel):
        raise UnsupportedComposite(f"unsupported composite structure {type(model).__name__}")
    J = np.atleast_2d(np.asarray(model.inner_jacobian(y), dtype=np.float64))
    if model.outer == "identity":
        if J.shape[0] != 1:
            raise UnsupportedComposite("identity outer needs m = 1")
        return model.simple.prox(y - J[0] / L, 1.0 / L)
    # 0.5||J x + e0||^2 + L/2||x - y||^2 with e affine
    e0 = np.asarray(model.inner(y), dtype=np.float64) - J @ y
    lhs = J.T @ J + L * np.eye(model.dim)
    return np.linalg.solve(lhs, L * y - J.T @ e0)


def moreau_envelope(model, lam: float, x) -> float:
    """``phi_lam(x) = phi(p) + ||x - p||^2 / (2 lam)`` with ``p = prox_{lam phi}(x)``."""
    x = np.asarray(x, dtype=np.float64)
    p = objective_prox(model, x, lam)
    return evaluate(model, p) + float((x - p) @ (x - p)) / (2 * lam)


def reference_minimizer(
    smooth_gradient, L: float, simple: SeparablePart, x0, tol: float = 1e-12,
    max_iter: int = 1_000_000,
) -> tuple[np.ndarray, float]:
    """Run forward-backward with ``t = 1/L`` until ``||R_t|| <= tol``.

    Returns the final point and the achieved residual norm.
    """
    t = 1.0 / L
    x = as_point(x0)
    res = np.inf
    for _ in range(max_iter):
        xp = simple.prox(x - t * np.asarray(smooth_gradient(x)), t)
        res = float(np.linalg.norm(x - xp)) / t
        x = xp
        if res <= tol:
            break
    return x, res
