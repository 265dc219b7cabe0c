"""Problem zoo: quadratics, least squares, lasso, PALM instances and 1-D toys.

Every builder returns an immutable :class:`~ebconv.core.ObjectiveModel`
(or :class:`~ebconv.core.CompositeModel`) with its critical set filled in.
Problems can also be described by a small JSON document::

    {"name": "quad", "constructor": "strongly_convex_quadratic",
     "params": {"Q": [[1, 0], [0, 4]], "b": [0, 0]}}

and built with :func:`load_problem`.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from typing import Any, Mapping, Sequence

import numpy as np

from .core import (
    AffineSet,
    Block,
    CompositeModel,
    FiniteSet,
    NumericOracle,
    ObjectiveModel,
    SeparablePart,
    SinglePoint,
    reference_minimizer,
    soft_threshold,
)

__all__ = [
    "make_strongly_convex_quadratic",
    "make_rank_deficient_least_squares",
    "make_lasso",
    "make_box_l1_scalar",
    "box_l1_envelope",
    "box_l1_envelope_linearization",
    "make_composite_counterexample",
    "counterexample_p",
    "counterexample_G",
    "make_palm_problem",
    "make_invex_1d",
    "make_quartic_1d",
    "make_composite_desk",
    "load_problem",
    "problem_hash",
    "CONSTRUCTORS",
]


def _matrix(A) -> np.ndarray:
    A = np.atleast_2d(np.array(A, dtype=np.float64))
    if A.ndim != 2 or not np.all(np.isfinite(A)):
        raise ValueError("expected a finite 2-D matrix")
    return A


def _vector(b, n: int | None = None) -> np.ndarray:
    b = np.array(b, dtype=np.float64).reshape(-1)
    if n is not None and b.size != n:
        raise ValueError(f"expected a vector of length {n}, got {b.size}")
    if not np.all(np.isfinite(b)):
        raise ValueError("vector has non-finite entries")
    return b


def _quadratic_constants(lam_min: float, L: float) -> dict:
    # analytic EB constants of a quadratic with curvature range [lam_min, L]
    # on the normal space of its solution set, gradient operator
    return {
        "kappa": lam_min,
        "nu": lam_min,
        "alpha": lam_min,
        "eta": math.sqrt(2.0 * lam_min),
        "beta": 1.0 / L,
        "omega": 2.0,
    }


def make_strongly_convex_quadratic(Q, b, name: str = "quadratic") -> ObjectiveModel:
    """``f(x) = 0.5 x'Qx - b'x`` with ``Q`` symmetric positive definite.

    Examples
    --------
    >>> m = make_strongly_convex_quadratic([[1, 0], [0, 4]], [1, 4])
    >>> m.critical_set.x_star
    array([1., 1.])
    """
    Q = _matrix(Q)
    n = Q.shape[0]
    if Q.shape != (n, n) or not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
        raise ValueError("Q must be square and symmetric")
    b = _vector(b, n)
    eig = np.linalg.eigvalsh(Q)
    if eig[0] <= 0:
        raise ValueError(f"Q is not positive definite (smallest eigenvalue {eig[0]:.3g})")
    mu, L = float(eig[0]), float(eig[-1])
    x_star = np.linalg.solve(Q, b)
    min_value = -0.5 * float(b @ x_star)
    eye = np.eye(n)

    def prox(x, lam):
        return np.linalg.solve(eye + lam * Q, x + lam * b)

    return ObjectiveModel(
        dim=n,
        smooth_value=lambda x: 0.5 * float(x @ Q @ x) - float(b @ x),
        smooth_gradient=lambda x: Q @ x - b,
        smooth_lipschitz=L,
        critical_set=SinglePoint(x_star, min_value=min_value),
        strong_convexity=mu,
        smooth_prox=prox,
        name=name,
        expected_constants=_quadratic_constants(mu, L),
    )


def _least_squares(A, b, name, require_consistent=True) -> ObjectiveModel:
    A = _matrix(A)
    m, n = A.shape
    b = _vector(b, m)
    x_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
    res = A @ x_ls - b
    if require_consistent and np.linalg.norm(res) > 1e-10 * max(1.0, np.linalg.norm(b)):
        raise ValueError("b is not in the range of A; the minimum value would not be 0")
    min_value = 0.5 * float(res @ res) if not require_consistent else 0.0
    AtA = A.T @ A
    Atb = A.T @ b
    eig = np.linalg.eigvalsh(AtA)
    L = float(eig[-1])
    if L <= 0:
        raise ValueError("A is the zero matrix")
    pos = eig[eig > 1e-12 * L]
    lam_min = float(pos[0])
    rank = pos.size
    eye = np.eye(n)

    def prox(x, lam):
        return np.linalg.solve(eye + lam * AtA, x + lam * Atb)

    crit = AffineSet(AtA, Atb, min_value=min_value)
    if rank == n:
        crit = SinglePoint(crit.anchor, min_value=min_value)
    return ObjectiveModel(
        dim=n,
        smooth_value=lambda x: 0.5 * float((A @ x - b) @ (A @ x - b)),
        smooth_gradient=lambda x: A.T @ (A @ x - b),
        smooth_lipschitz=L,
        critical_set=crit,
        strong_convexity=lam_min if rank == n else None,
        smooth_prox=prox,
        name=name,
        expected_constants=_quadratic_constants(lam_min, L),
    )


def make_rank_deficient_least_squares(A, b, name: str = "least_squares") -> ObjectiveModel:
    """``f(x) = 0.5 ||Ax - b||^2`` with ``b`` in the range of ``A``.

    The critical set is the affine solution set ``{x : A'Ax = A'b}``. EB
    constants are governed by the smallest *positive* eigenvalue of ``A'A``.
    """
    return _least_squares(A, b, name)


def make_lasso(A, b, w: float, name: str = "lasso") -> ObjectiveModel:
    """``0.5 ||Ax - b||^2 + w ||x||_1``.

    The minimizer is closed-form when ``A'A = I`` (soft thresholding of
    ``A'b``); otherwise it comes from a long forward-backward run. ``w = 0``
    falls back to least squares with an affine solution set.
    """
    A = _matrix(A)
    m, n = A.shape
    b = _vector(b, m)
    w = float(w)
    if w < 0:
        raise ValueError("l1 weight must be nonnegative")
    if w == 0:
        return _least_squares(A, b, name, require_consistent=False)
    AtA = A.T @ A
    L = float(np.linalg.eigvalsh(AtA)[-1])
    simple = SeparablePart.l1(n, w)

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def grad(x):
        return A.T @ (A @ x - b)

    if np.allclose(AtA, np.eye(n), rtol=0, atol=1e-14):
        x_star = soft_threshold(A.T @ b, w)
        crit = SinglePoint(x_star, min_value=value(x_star) + simple.value(x_star))
    else:
        x_ref, achieved = reference_minimizer(grad, L, simple, np.zeros(n))
        crit = NumericOracle(
            x_ref, solve_tolerance=max(achieved, 1e-12),
            min_value=value(x_ref) + simple.value(x_ref),
        )
    return ObjectiveModel(
        dim=n,
        smooth_value=value,
        smooth_gradient=grad,
        smooth_lipschitz=L,
        critical_set=crit,
        simple=simple,
        name=name,
    )


# ---------------------------------------------------------------------------
# scalar l1-plus-interval example


_BOX = 2.0


def make_box_l1_scalar(name: str = "box_l1_scalar") -> ObjectiveModel:
    """``g(x) = |x| + indicator(-2 <= x <= 2)`` on the real line, ``f = 0``.

    Convex but not strongly convex; its Moreau envelope at ``lam = 1`` is
    nevertheless strongly convex "enough" for the composite bound with
    ``mu <= 1/9``.
    """
    return ObjectiveModel(
        dim=1,
        smooth_value=lambda x: 0.0,
        smooth_gradient=lambda x: np.zeros(1),
        smooth_lipschitz=1.0,
        critical_set=SinglePoint([0.0]),
        simple=SeparablePart.l1_box(1, 1.0, -_BOX, _BOX),
        smooth_is_zero=True,
        name=name,
    )


def box_l1_envelope(x, lam: float = 1.0):
    """Closed-form Moreau envelope of ``|x| + indicator([-2, 2])``.

    ``g_lam(x) = |p| + (x - p)^2 / (2 lam)`` with ``p`` the shrink-then-clamp
    prox. Vectorized over ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    p = np.clip(soft_threshold(x, lam), -_BOX, _BOX)
    return np.abs(p) + (x - p) ** 2 / (2.0 * lam)


def box_l1_envelope_linearization(x, y):
    """Five-branch ``g_1(y) + g_1'(y) (x - y)`` for the unit envelope."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x, y = np.broadcast_arrays(x, y)
    return np.select(
        [y <= -3, y <= -1, y <= 1, y <= 3],
        [
            (y + 2) * x - 0.5 * y**2 + 4,
            -x - 0.5,
            y * x - 0.5 * y**2,
            x - 0.5,
        ],
        default=(y - 2) * x - 0.5 * y**2 + 4,
    )


# ---------------------------------------------------------------------------
# composite counterexample: e(x) = (x1, x1), outer 0.5||.||^2


_DUP = np.array([[1.0, 0.0], [1.0, 0.0]])


def make_composite_counterexample(name: str = "composite_counterexample") -> CompositeModel:
    """``phi(x) = 0.5 ||(x1, x1)||^2 = x1^2`` written through a strongly convex outer map.

    The outer function is strongly convex yet the composite bound fails,
    because the duplicated inner map has a nontrivial kernel.
    """
    return CompositeModel(
        dim=2,
        inner=lambda x: _DUP @ np.asarray(x, dtype=np.float64),
        inner_jacobian=lambda x: _DUP,
        outer="half_sq_norm",
        critical_set=AffineSet([[1.0, 0.0]], [0.0]),
        inner_affine=True,
        name=name,
    )


def counterexample_p(y, L: float) -> np.ndarray:
    """Closed form ``p(y) = (L y1 / (L + 2), y2)`` for the counterexample."""
    y = np.asarray(y, dtype=np.float64)
    return np.array([L * y[0] / (L + 2.0), y[1]])


def counterexample_G(y, L: float) -> np.ndarray:
    """Closed form ``G(y) = (2 L y1 / (L + 2), 0)`` for the counterexample."""
    y = np.asarray(y, dtype=np.float64)
    return np.array([2.0 * L * y[0] / (L + 2.0), 0.0])


# ---------------------------------------------------------------------------
# PALM


def _parse_g_kind(kind, length: int) -> SeparablePart:
    if isinstance(kind, str):
        tag, args = kind, ()
    elif isinstance(kind, Mapping):
        if len(kind) != 1:
            raise ValueError(f"bad block regularizer {kind!r}")
        tag, args = next(iter(kind.items()))
        args = args if isinstance(args, (list, tuple)) else (args,)
    else:
        tag, *args = kind
    if tag == "zero":
        return SeparablePart.zero(length)
    if tag == "l1":
        return SeparablePart.l1(length, *args)
    if tag == "box":
        return SeparablePart.box(length, *args)
    raise ValueError(f"unknown block regularizer {tag!r}")


def make_palm_problem(A, b, block_sizes: Sequence[int], g_kinds: Sequence,
                      name: str = "palm") -> ObjectiveModel:
    """Block problem ``0.5 ||Ax - b||^2 + sum_j g_j(x_j)``.

    ``g_kinds`` entries are ``"zero"``, ``("l1", w)`` / ``{"l1": w}`` or
    ``("box", lo, hi)`` / ``{"box": [lo, hi]}``. Block moduli are the top
    eigenvalues of ``A_j'A_j``.
    """
    A = _matrix(A)
    m, n = A.shape
    b = _vector(b, m)
    sizes = [int(s) for s in block_sizes]
    if any(s < 1 for s in sizes) or sum(sizes) != n:
        raise ValueError(f"block sizes {sizes} do not partition {n} coordinates")
    if len(g_kinds) != len(sizes):
        raise ValueError("need one regularizer per block")
    blocks, parts, off = [], [], 0
    for size, kind in zip(sizes, g_kinds):
        Aj = A[:, off:off + size]
        Lj = float(np.linalg.eigvalsh(Aj.T @ Aj)[-1])
        if Lj <= 0:
            raise ValueError(f"block at offset {off} has a zero column block")
        blocks.append(Block(off, size, Lj))
        parts.append(_parse_g_kind(kind, size))
        off += size
    simple = SeparablePart.concat(parts)
    L = float(np.linalg.eigvalsh(A.T @ A)[-1])

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def grad(x):
        return A.T @ (A @ x - b)

    if simple.is_zero:
        base = _least_squares(A, b, name, require_consistent=False)
        crit = base.critical_set
    else:
        x_ref, achieved = reference_minimizer(grad, L, simple, np.zeros(n))
        crit = NumericOracle(x_ref, max(achieved, 1e-12),
                             min_value=value(x_ref) + simple.value(x_ref))
    return ObjectiveModel(
        dim=n,
        smooth_value=value,
        smooth_gradient=grad,
        smooth_lipschitz=L,
        critical_set=crit,
        simple=simple,
        blocks=tuple(blocks),
        name=name,
    )


# ---------------------------------------------------------------------------
# 1-D toys


def make_invex_1d(name: str = "invex_1d") -> ObjectiveModel:
    """``f(x) = x^2 + 3 sin(x)^2``: nonconvex, every critical point is global.

    ``f''(x) = 2 + 6 cos(2x)`` lies in ``[-4, 8]``, hence ``L = 8``.
    """
    return ObjectiveModel(
        dim=1,
        smooth_value=lambda x: float(x[0] ** 2 + 3.0 * math.sin(x[0]) ** 2),
        smooth_gradient=lambda x: np.array([2.0 * x[0] + 3.0 * math.sin(2.0 * x[0])]),
        smooth_lipschitz=8.0,
        critical_set=SinglePoint([0.0]),
        convex=False,
        name=name,
    )


def make_quartic_1d(name: str = "quartic_1d") -> ObjectiveModel:
    """``f(x) = x^4``; gradient methods converge only sublinearly to 0.

    ``L = 12`` is the curvature bound on the sublevel set ``{f <= 1}``.
    """
    return ObjectiveModel(
        dim=1,
        smooth_value=lambda x: float(x[0] ** 4),
        smooth_gradient=lambda x: np.array([4.0 * x[0] ** 3]),
        smooth_lipschitz=12.0,
        critical_set=SinglePoint([0.0]),
        smooth_prox=None,
        name=name,
    )


def make_composite_desk(mu_prime: float = 0.25, name: str = "composite_desk") -> ObjectiveModel:
    """``(mu'/2) x^2 + |x| + indicator([-2, 2])``: strongly convex plus a kinked part."""
    mu_prime = float(mu_prime)
    if not mu_prime > 0:
        raise ValueError("mu_prime must be positive")
    return ObjectiveModel(
        dim=1,
        smooth_value=lambda x: 0.5 * mu_prime * float(x[0] ** 2),
        smooth_gradient=lambda x: mu_prime * np.asarray(x, dtype=np.float64),
        smooth_lipschitz=mu_prime,
        critical_set=SinglePoint([0.0]),
        simple=SeparablePart.l1_box(1, 1.0, -_BOX, _BOX),
        strong_convexity=mu_prime,
        name=name,
    )


def make_two_wells(name: str = "two_wells") -> ObjectiveModel:
    """``f(x) = 0.25 (x1^2 - 1)^2 + 0.5 x2^2``: two global minimizers ``(+-1, 0)``.

    Used to exercise finite critical sets. The curvature bound ``L = 8`` holds
    on ``|x1| <= 5/3``.
    """
    return ObjectiveModel(
        dim=2,
        smooth_value=lambda x: 0.25 * float((x[0] ** 2 - 1) ** 2) + 0.5 * float(x[1] ** 2),
        smooth_gradient=lambda x: np.array([x[0] ** 3 - x[0], x[1]]),
        smooth_lipschitz=8.0,
        critical_set=FiniteSet(([1.0, 0.0], [-1.0, 0.0])),
        convex=False,
        name=name,
    )


# ---------------------------------------------------------------------------
# JSON loading


def _dual_from_params(params):
    from .dual import dual_from_params

    return dual_from_params(params)


CONSTRUCTORS = {
    "strongly_convex_quadratic": lambda p: make_strongly_convex_quadratic(p["Q"], p["b"]),
    "rank_deficient_least_squares": lambda p: make_rank_deficient_least_squares(p["A"], p["b"]),
    "lasso": lambda p: make_lasso(p["A"], p["b"], p["w"]),
    "box_l1_scalar": lambda p: make_box_l1_scalar(),
    "composite_counterexample": lambda p: make_composite_counterexample(),
    "palm": lambda p: make_palm_problem(p["A"], p["b"], p["block_sizes"], p["g_kinds"]),
    "invex_1d": lambda p: make_invex_1d(),
    "quartic_1d": lambda p: make_quartic_1d(),
    "composite_desk": lambda p: make_composite_desk(p.get("mu_prime", 0.25)),
    "two_wells": lambda p: make_two_wells(),
    "dual": _dual_from_params,
}


def _read_doc(doc) -> dict:
    if isinstance(doc, Mapping):
        return dict(doc)
    path = os.fspath(doc)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_problem(doc: Mapping[str, Any] | str | os.PathLike):
    """Build a model from a JSON document (mapping or file path).

    Raises
    ------
    FileNotFoundError
        When a path is given and does not exist.
    ValueError
        On unknown constructors or missing parameters.
    """
    doc = _read_doc(doc)
    ctor = doc.get("constructor")
    if ctor not in CONSTRUCTORS:
        raise ValueError(f"unknown constructor {ctor!r}; known: {sorted(CONSTRUCTORS)}")
    params = doc.get("params", {}) or {}
    try:
        model = CONSTRUCTORS[ctor](params)
    except KeyError as exc:
        raise ValueError(f"constructor {ctor!r} is missing parameter {exc.args[0]!r}") from None
    name = doc.get("name")
    if name and hasattr(model, "name") and model.name != name:
        import dataclasses

        model = dataclasses.replace(model, name=name)
    return model


def problem_hash(doc) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    doc = _read_doc(doc)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
