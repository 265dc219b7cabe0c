"""Error-bound checks, empirical constant estimation and the implication chain.

Each of the six conditions compares a left-hand side built from the residual
``G(x)``, the distance ``d(x)`` to the critical set and the gap
``phi(x) - min phi`` against a constant times a right-hand side:

=============  ===========================  ====================
kind           lhs                          rhs
=============  ===========================  ====================
res-eb         ``||G||``                    ``d``
cor-eb         ``min <G, x - x_p>``         ``d^2``
obj-eb         ``gap``                      ``d^2 / 2``
res-obj-eb     ``||G||``                    ``sqrt(gap)``
cor-res-eb     ``<G, x - x_p>``             ``||G||^2``
cor-obj-eb     ``<G, x - x_p>``             ``gap``
=============  ===========================  ====================

A condition holds at constant ``c`` on a sample set when
``lhs - c * rhs >= -1e-8`` for every sample. The empirical best constant is
the smallest ratio ``lhs / rhs`` over samples away from the critical set.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    AffineSet,
    ObjectiveModel,
    OutsideDomain,
    ProxGradientResidual,
    Region,
    UnsupportedComposite,
    CompositeModel,
    evaluate,
    operator_name,
    prox_gradient_point,
    prox_linearized,
    residual,
)

__all__ = [
    "EBKind",
    "SamplePlan",
    "SampleSet",
    "EBCheckReport",
    "LegResult",
    "ChainReport",
    "ProxDecreaseReport",
    "PairGrid",
    "SmoothFailureReport",
    "SLACK_TOL",
    "EST_RTOL",
    "draw_samples",
    "check_condition",
    "estimate_constant",
    "implication_constants",
    "verify_implication_chain",
    "check_assum2",
    "check_composite_eb",
    "check_rel1_failure_quadratic",
    "sublevel_radius",
]

#: Absolute slack allowed on each inequality.
SLACK_TOL = 1e-8
#: Relative tolerance on empirical constant estimates.
EST_RTOL = 0.05
# samples this close to the critical set carry no ratio information
_NEAR_CRIT = 1e-8
_TINY_RHS = 1e-16
# relative rounding allowance for the pointwise implication legs
_ROUNDING = 1e-12


class EBKind(str, enum.Enum):
    RES = "res-eb"
    COR = "cor-eb"
    OBJ = "obj-eb"
    RES_OBJ = "res-obj-eb"
    COR_RES = "cor-res-eb"
    COR_OBJ = "cor-obj-eb"

    @classmethod
    def parse(cls, value) -> "EBKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown EB condition {value!r}; expected one of {[k.value for k in cls]}"
            ) from None

    @property
    def needs_residual(self) -> bool:
        return self is not EBKind.OBJ


STRATEGIES = ("gaussian-rejection", "ray-from-critical", "grid")


@dataclass(frozen=True)
class SamplePlan:
    """How to draw points from a sublevel region.

    ``sigma`` overrides the Gaussian spread, which otherwise defaults to the
    median sublevel radius around the critical set.
    """

    region: Region
    count: int = 1000
    seed: int = 0
    strategy: str = "gaussian-rejection"
    sigma: float | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")


# ---------------------------------------------------------------------------
# sampling


def sublevel_radius(model, base, direction, level: float, cap: float = 1e3) -> float:
    """Largest ``s <= cap`` with ``phi(base + s u) <= min phi + level`` (bisection)."""
    u = np.asarray(direction, dtype=np.float64)
    target = model.critical_set.min_value + level

    def inside(s):
        v = evaluate(model, base + s * u)
        return np.isfinite(v) and v <= target

    if inside(cap):
        return cap
    lo, hi = 0.0, 1.0
    while inside(hi):
        lo, hi = hi, min(2 * hi, cap)
    if lo == 0.0:
        while not inside(hi / 2) and hi > 1e-12:
            hi /= 2
        lo = hi / 2
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _unit(rng, n):
    while True:
        u = rng.standard_normal(n)
        nrm = np.linalg.norm(u)
        if nrm > 1e-12:
            return u / nrm


def _base_point(model, rng, spread):
    crit = model.critical_set
    if isinstance(crit, AffineSet):
        basis = crit.null_basis
        if basis.shape[1] == 0:
            return crit.anchor.copy()
        return crit.anchor + basis @ (spread * rng.standard_normal(basis.shape[1]))
    pts = crit.points()
    return pts[int(rng.integers(len(pts)))] if len(pts) > 1 else pts[0]


def _default_sigma(model, plan, rng):
    base = _base_point(model, rng, 0.0)
    radii = [
        sublevel_radius(model, base, _unit(rng, model.dim), plan.region.level_offset)
        for _ in range(8)
    ]
    return float(np.median(radii))


def _raw_points(model, plan: SamplePlan) -> list[np.ndarray]:
    rng = np.random.default_rng(plan.seed)
    n = model.dim
    region = plan.region
    pts: list[np.ndarray] = []
    if plan.strategy == "gaussian-rejection":
        sigma = plan.sigma if plan.sigma is not None else _default_sigma(model, plan, rng)
        attempts = 0
        while len(pts) < plan.count and attempts < 200 * plan.count:
            attempts += 1
            base = _base_point(model, rng, sigma)
            x = base + sigma * rng.standard_normal(n) / math.sqrt(n)
            if region.contains(model, x):
                pts.append(x)
    elif plan.strategy == "ray-from-critical":
        fracs = rng.permutation(np.logspace(-3, 0, plan.count))
        for frac in fracs:
            base = _base_point(model, rng, 1.0)
            u = _unit(rng, n)
            smax = sublevel_radius(model, base, u, region.level_offset)
            x = base + frac * smax * u
            if region.contains(model, x):
                pts.append(x)
    else:
        if n > 2:
            raise ValueError("grid sampling supports n <= 2 only")
        base = _base_point(model, rng, 0.0)
        R = max(
            sublevel_radius(model, base, s * e, region.level_offset)
            for e in np.eye(n)
            for s in (1.0, -1.0)
        )
        per_axis = max(2, int(math.ceil(plan.count ** (1.0 / n))))
        axis = np.linspace(-R, R, per_axis)
        mesh = np.meshgrid(*([axis] * n), indexing="ij")
        for offs in np.stack([m.reshape(-1) for m in mesh], axis=1):
            x = base + offs
            if region.contains(model, x):
                pts.append(x)
    if not pts:
        raise ValueError("no samples could be drawn inside the region")
    return pts


@dataclass(frozen=True)
class _Eval:
    x: np.ndarray
    d: float
    gap: float
    G: np.ndarray | None
    inner: float  # min over nearest critical points of <G, x - x_p>
    inner_max: float


def _evaluate_point(model, operator, need_G: bool, x) -> _Eval | None:
    crit = model.critical_set
    nearest = crit.nearest(x)
    d = float(np.linalg.norm(x - nearest[0]))
    gap = max(evaluate(model, x) - crit.min_value, 0.0)
    G = None
    inner = inner_max = math.nan
    if need_G:
        try:
            G = residual(model, operator, x)
        except OutsideDomain:
            return None
        vals = [float(G @ (x - p)) for p in nearest]
        inner, inner_max = min(vals), max(vals)
    return _Eval(x, d, gap, G, inner, inner_max)


def _ordered_map(fn, items, threads: int | None):
    if threads is None or threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class SampleSet:
    """Evaluated samples shared by several checks on the same plan."""

    xs: np.ndarray
    d: np.ndarray
    gap: np.ndarray
    gnorm: np.ndarray
    inner: np.ndarray
    skipped: int
    operator: object

    def __len__(self):
        return self.xs.shape[0]

    def terms(self, kind: EBKind) -> tuple[np.ndarray, np.ndarray]:
        kind = EBKind.parse(kind)
        if kind is EBKind.RES:
            return self.gnorm, self.d
        if kind is EBKind.COR:
            return self.inner, self.d**2
        if kind is EBKind.OBJ:
            return self.gap, 0.5 * self.d**2
        if kind is EBKind.RES_OBJ:
            return self.gnorm, np.sqrt(self.gap)
        if kind is EBKind.COR_RES:
            return self.inner, self.gnorm**2
        return self.inner, self.gap


def draw_samples(model, operator, plan: SamplePlan, need_residual: bool = True,
                 threads: int | None = None) -> SampleSet:
    """Draw and evaluate samples once; reuse the result across conditions."""
    pts = _raw_points(model, plan)
    evals = _ordered_map(lambda x: _evaluate_point(model, operator, need_residual, x),
                         pts, threads)
    kept = [e for e in evals if e is not None]
    skipped = len(evals) - len(kept)
    if not kept:
        raise ValueError("every sample fell outside the domain of the subdifferential")
    n = model.dim
    return SampleSet(
        xs=np.array([e.x for e in kept]).reshape(len(kept), n),
        d=np.array([e.d for e in kept]),
        gap=np.array([e.gap for e in kept]),
        gnorm=np.array([np.linalg.norm(e.G) if e.G is not None else math.nan for e in kept]),
        inner=np.array([e.inner for e in kept]),
        skipped=skipped,
        operator=operator,
    )


# ---------------------------------------------------------------------------
# reports


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass(frozen=True)
class EBCheckReport:
    """Outcome of one condition check on one sample set."""

    kind: str
    operator: str
    claimed_constant: float
    verdict: str
    worst_ratio: float
    witness: tuple
    samples_used: int
    samples_skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "operator": self.operator,
            "claimed_constant": _num(self.claimed_constant),
            "verdict": self.verdict,
            "worst_ratio": _num(self.worst_ratio),
            "witness": [_num(v) for v in self.witness],
            "samples_used": int(self.samples_used),
            "samples_skipped": int(self.samples_skipped),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _informative(samples: SampleSet, rhs: np.ndarray) -> np.ndarray:
    return (samples.d > _NEAR_CRIT) & (rhs > _TINY_RHS)


def _ratios(lhs, rhs, mask):
    out = np.full(lhs.shape, np.inf)
    out[mask] = lhs[mask] / rhs[mask]
    return out


def _write_sample_csv(path, samples: SampleSet, lhs, rhs, ratio, slack):
    n = samples.xs.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i"] + [f"x{j}" for j in range(n)] + ["lhs", "rhs", "ratio", "slack"])
        for i in range(len(samples)):
            row = [i] + [f"{v:.17g}" for v in samples.xs[i]]
            row += [f"{v:.17g}" for v in (lhs[i], rhs[i], ratio[i], slack[i])]
            w.writerow(row)


def _as_samples(model, operator, kind, plan_or_samples, threads):
    if isinstance(plan_or_samples, SampleSet):
        return plan_or_samples
    return draw_samples(model, operator, plan_or_samples,
                        need_residual=EBKind.parse(kind).needs_residual, threads=threads)


def check_condition(model, operator, kind, constant: float, plan, *,
                    threads: int | None = None, samples_csv=None) -> EBCheckReport:
    """Test one EB inequality at ``constant`` on every sample of ``plan``.

    ``plan`` may also be a pre-drawn :class:`SampleSet`. The witness is the
    most violated sample on failure, otherwise the sample attaining the
    worst ratio (first by index on ties).
    """
    kind = EBKind.parse(kind)
    if not constant > 0:
        raise ValueError("EB constants must be positive")
    samples = _as_samples(model, operator, kind, plan, threads)
    lhs, rhs = samples.terms(kind)
    slack = lhs - constant * rhs
    mask = _informative(samples, rhs)
    ratio = _ratios(lhs, rhs, mask)
    worst = float(ratio.min()) if mask.any() else math.inf
    ok = bool(np.all(slack >= -SLACK_TOL))
    idx = int(np.argmin(slack)) if not ok else int(np.argmin(ratio))
    if samples_csv is not None:
        _write_sample_csv(samples_csv, samples, lhs, rhs, ratio, slack)
    return EBCheckReport(
        kind=kind.value,
        operator=operator_name(operator),
        claimed_constant=float(constant),
        verdict="pass" if ok else "fail",
        worst_ratio=worst,
        witness=tuple(float(v) for v in samples.xs[idx]),
        samples_used=len(samples),
        samples_skipped=samples.skipped,
    )


def estimate_constant(model, operator, kind, plan, *, threads: int | None = None) -> float:
    """Empirical best constant: the smallest ``lhs / rhs`` away from the critical set."""
    kind = EBKind.parse(kind)
    samples = _as_samples(model, operator, kind, plan, threads)
    lhs, rhs = samples.terms(kind)
    mask = _informative(samples, rhs)
    if not mask.any():
        raise ValueError("all samples lie on the critical set; nothing to estimate")
    return float(np.min(lhs[mask] / rhs[mask]))


# ---------------------------------------------------------------------------
# implication chain


def implication_constants(alpha: float | None = None, omega: float | None = None,
                          kappa: float | None = None, eta: float | None = None) -> dict:
    """Constants transferred along the chain obj -> cor -> res -> res-obj (and back).

    ``nu = alpha omega / 2``, ``kappa = nu``, ``eta = sqrt(kappa omega)`` and,
    for the reverse direction, ``alpha' = eta^2 / 2``.

    Examples
    --------
    >>> implication_constants(alpha=1.0, omega=1.0)["nu"]
    0.5
    """
    for name, val in (("alpha", alpha), ("omega", omega), ("kappa", kappa), ("eta", eta)):
        if val is not None and not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    if alpha is None and kappa is None and eta is None:
        raise ValueError("need at least one of alpha, kappa, eta")
    out: dict = {}
    if alpha is not None:
        if omega is None:
            raise ValueError("omega is required to transfer alpha")
        out["nu"] = alpha * omega / 2.0
        out["kappa"] = out["nu"]
    if kappa is not None:
        out["kappa"] = kappa
    if "kappa" in out and omega is not None:
        out["eta"] = math.sqrt(out["kappa"] * omega)
    if eta is not None:
        out["eta"] = eta
    if "eta" in out:
        out["alpha_reverse"] = out["eta"] ** 2 / 2.0
    return out


@dataclass(frozen=True)
class LegResult:
    name: str
    constant: float
    premises: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self):
        return {"name": self.name, "constant": _num(self.constant),
                "premises": self.premises, "violations": self.violations,
                "status": "exact-pass" if self.passed else "fail"}


@dataclass(frozen=True)
class ChainReport:
    alpha_hat: float
    omega_hat: float
    eta_hat: float
    constants: dict
    legs: tuple
    reverse: EBCheckReport
    cor_obj: EBCheckReport
    samples_used: int

    @property
    def pointwise_passed(self) -> bool:
        return all(leg.passed for leg in self.legs)

    @property
    def passed(self) -> bool:
        return self.pointwise_passed and self.reverse.passed

    def to_dict(self):
        return {
            "alpha_hat": _num(self.alpha_hat),
            "omega_hat": _num(self.omega_hat),
            "eta_hat": _num(self.eta_hat),
            "constants": {k: _num(v) for k, v in sorted(self.constants.items())},
            "legs": [leg.to_dict() for leg in self.legs],
            "reverse_leg": self.reverse.to_dict(),
            "cor_obj": self.cor_obj.to_dict(),
            "samples_used": self.samples_used,
        }


def _geq(a, b):
    """``a >= b`` up to a relative rounding allowance."""
    return a >= b - _ROUNDING * np.maximum(np.abs(a), np.abs(b))


def verify_implication_chain(model, operator, plan, *, omega: float | None = None,
                             threads: int | None = None) -> ChainReport:
    """Check obj -> cor -> res -> res-obj pointwise and the reverse leg empirically.

    Parameters
    ----------
    omega : float, optional
        Pin the cor-obj constant (e.g. 1 for convex problems). It is checked
        on the samples first; when omitted the empirical best value is used.

    Notes
    -----
    The three forward legs are algebraic consequences that must hold sample
    by sample; they are evaluated in the order the algebra runs, with only
    a relative allowance of 1e-12 for floating-point rounding. The reverse
    leg (res-obj at ``eta`` implies obj at ``eta^2 / 2``) is a global
    statement, so it is tested on the same samples with the 5% estimate
    tolerance.
    """
    samples = _as_samples(model, operator, EBKind.COR, plan, threads)
    keep = samples.d > _NEAR_CRIT
    if not keep.any():
        raise ValueError("all samples lie on the critical set")
    alpha_hat = estimate_constant(model, operator, EBKind.OBJ, samples)
    if omega is None:
        omega = estimate_constant(model, operator, EBKind.COR_OBJ, samples)
    cor_obj = check_condition(model, operator, EBKind.COR_OBJ, omega, samples)
    eta_hat = estimate_constant(model, operator, EBKind.RES_OBJ, samples)
    consts = implication_constants(alpha=alpha_hat, omega=omega)
    nu, kappa, eta = consts["nu"], consts["kappa"], consts["eta"]

    d, gap, gn, inner = (a[keep] for a in (samples.d, samples.gap, samples.gnorm, samples.inner))
    legs = []
    # obj(alpha) and cor-obj(omega) give <G, x - x_p> >= omega gap >= nu d^2
    prem = _geq(gap, 0.5 * alpha_hat * d**2) & _geq(inner, omega * gap)
    concl = _geq(inner, nu * d**2)
    legs.append(LegResult("obj+cor-obj=>cor", nu, int(prem.sum()), int((prem & ~concl).sum())))
    # Cauchy-Schwarz: ||G|| d >= <G, x - x_p> >= nu d^2
    prem = _geq(inner, nu * d**2)
    concl = _geq(gn, kappa * d)
    legs.append(LegResult("cor=>res", kappa, int(prem.sum()), int((prem & ~concl).sum())))
    # ||G||^2 >= kappa d ||G|| >= kappa <G, x - x_p> >= kappa omega gap
    prem = _geq(gn, kappa * d) & _geq(inner, omega * gap)
    concl = _geq(gn, eta * np.sqrt(gap))
    legs.append(LegResult("res+cor-obj=>res-obj", eta, int(prem.sum()),
                          int((prem & ~concl).sum())))

    alpha_rev = implication_constants(eta=eta_hat)["alpha_reverse"]
    reverse = check_condition(model, operator, EBKind.OBJ, (1 - EST_RTOL) * alpha_rev, samples)
    return ChainReport(alpha_hat, float(omega), eta_hat, consts, tuple(legs), reverse,
                       cor_obj, len(samples))


# ---------------------------------------------------------------------------
# sufficient-decrease assumption for the prox-gradient residual


@dataclass(frozen=True)
class ProxDecreaseReport:
    report: EBCheckReport
    implied_omega: float

    @property
    def passed(self):
        return self.report.passed


def check_assum2(model: ObjectiveModel, t: float, epsilon: float, plan, *,
                 threads: int | None = None) -> ProxDecreaseReport:
    """Check ``||R_t(x)||^2 >= eps (phi(x) - phi(x+))`` with ``x+`` the prox-gradient point.

    Also reports the cor-obj constant ``omega = t eps / 2`` it implies.
    """
    L = model.smooth_lipschitz
    if not (0 < t <= 1.0 / L * (1 + 1e-12)):
        raise ValueError(f"t must lie in (0, 1/L] = (0, {1.0 / L}]")
    if not (0 < epsilon <= 2.0 / t * (1 + 1e-12)):
        raise ValueError(f"epsilon must lie in (0, 2/t] = (0, {2.0 / t}]")
    op = ProxGradientResidual(t)
    pts = _raw_points(model, plan)

    def terms(x):
        xp = prox_gradient_point(model, x, t)
        r = (x - xp) / t
        return float(r @ r), evaluate(model, x) - evaluate(model, xp)

    vals = _ordered_map(terms, pts, threads)
    lhs = np.array([v[0] for v in vals])
    rhs = np.array([v[1] for v in vals])
    slack = lhs - epsilon * rhs
    mask = rhs > _TINY_RHS
    ratio = _ratios(lhs, rhs, mask)
    ok = bool(np.all(slack >= -SLACK_TOL))
    idx = int(np.argmin(slack)) if not ok else int(np.argmin(ratio))
    rep = EBCheckReport(
        kind="prox-decrease",
        operator=operator_name(op),
        claimed_constant=float(epsilon),
        verdict="pass" if ok else "fail",
        worst_ratio=float(ratio.min()) if mask.any() else math.inf,
        witness=tuple(float(v) for v in pts[idx]),
        samples_used=len(pts),
    )
    return ProxDecreaseReport(rep, t * epsilon / 2.0)


# ---------------------------------------------------------------------------
# composite bound


@dataclass(frozen=True)
class PairGrid:
    """Cartesian product of ``xs`` and ``ys`` point lists."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.array(self.xs, dtype=np.float64)
        ys = np.array(self.ys, dtype=np.float64)
        object.__setattr__(self, "xs", xs.reshape(xs.shape[0], -1))
        object.__setattr__(self, "ys", ys.reshape(ys.shape[0], -1))
        if self.xs.shape[1] != self.ys.shape[1]:
            raise ValueError("x and y grids have different dimensions")

    @classmethod
    def box(cls, x_lo, x_hi, y_lo, y_hi, step: float, dim: int = 1) -> "PairGrid":
        """Regular grids with the given spacing; endpoints are included exactly."""
        def axis(lo, hi):
            return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)

        def mesh(lo, hi):
            ax = axis(lo, hi)
            m = np.meshgrid(*([ax] * dim), indexing="ij")
            return np.stack([g.reshape(-1) for g in m], axis=1)

        return cls(mesh(x_lo, x_hi), mesh(y_lo, y_hi))


def check_composite_eb(model, mu: float, L: float, grid: PairGrid) -> EBCheckReport:
    """Check the composite bound over all ``(x, y)`` pairs of ``grid``.

    The inequality is ``<G(y), y - x> >= phi(p(y)) - phi(x) + ||G(y)||^2 / (2L)
    + (mu / 2) ||x - y||^2``. ``worst_ratio`` is the largest ``mu`` the grid
    supports (minimum over pairs with ``x != y``), and the witness is the
    concatenation ``(x, y)`` of the most violated (or tightest) pair.
    Points with ``phi(x) = inf`` are skipped.
    """
    if not (0 < mu < L):
        raise ValueError("the composite bound needs 0 < mu < L")
    if not isinstance(model, (ObjectiveModel, CompositeModel)):
        raise UnsupportedComposite(f"unsupported model type {type(model).__name__}")
    fx = np.array([evaluate(model, x) for x in grid.xs])
    finite = np.isfinite(fx)
    X, fx = grid.xs[finite], fx[finite]
    Y = grid.ys
    P = np.array([prox_linearized(model, L, y) for y in Y]).reshape(Y.shape)
    G = L * (Y - P)
    fp = np.array([evaluate(model, p) for p in P])
    inner = np.sum(G * Y, axis=1)[:, None] - G @ X.T
    dist2 = np.sum(Y**2, axis=1)[:, None] + np.sum(X**2, axis=1)[None, :] - 2 * Y @ X.T
    dist2 = np.maximum(dist2, 0.0)
    base = inner - (fp[:, None] - fx[None, :] + np.sum(G**2, axis=1)[:, None] / (2 * L))
    slack = base - 0.5 * mu * dist2
    mask = dist2 > _TINY_RHS
    mu_max = np.full(slack.shape, np.inf)
    mu_max[mask] = 2 * base[mask] / dist2[mask]
    ok = bool(np.all(slack >= -SLACK_TOL))
    flat = int(np.argmin(slack)) if not ok else int(np.argmin(mu_max))
    iy, ix = np.unravel_index(flat, slack.shape)
    return EBCheckReport(
        kind="composite-eb",
        operator=f"composite(L={L!r})",
        claimed_constant=float(mu),
        verdict="pass" if ok else "fail",
        worst_ratio=float(mu_max.min()),
        witness=tuple(float(v) for v in np.concatenate([X[ix], Y[iy]])),
        samples_used=int(slack.size),
        samples_skipped=int((~finite).sum() * Y.shape[0]),
    )


@dataclass(frozen=True)
class SmoothFailureReport:
    mus: tuple
    violated: tuple
    max_violation: tuple
    witnesses: tuple

    @property
    def all_violated(self) -> bool:
        return all(self.violated)


def check_rel1_failure_quadratic(a, mus: Sequence[float] = (1e-6, 1e-3, 1.0),
                                 base_points=None, scales=None, h=None) -> SmoothFailureReport:
    """Show that ``e(x) = 0.5 (a'x)^2`` violates the smooth composite bound for every ``mu``.

    The bound is evaluated in full, ``e(x) >= e(y - grad e(y)/L)
    + ||grad e(y)||^2/(2L) + <grad e(y), x - y> + (mu/2)||x - y||^2`` with
    ``L = ||a||^2``, at pairs ``y = x + s h`` where ``h`` is orthogonal to
    ``a``. Pairs with ``x = y`` are excluded.
    """
    a = np.array(a, dtype=np.float64).reshape(-1)
    n = a.size
    if n < 2:
        raise ValueError("need n >= 2 for a direction orthogonal to a")
    L = float(a @ a)
    if L == 0:
        raise ValueError("a must be nonzero")
    if h is None:
        _, _, vt = np.linalg.svd(a[None, :])
        h = vt[1]
    h = np.asarray(h, dtype=np.float64)
    if abs(a @ h) > 1e-12 * np.linalg.norm(h) * math.sqrt(L):
        raise ValueError("h must be orthogonal to a")
    if base_points is None:
        base_points = [np.zeros(n), a / math.sqrt(L), np.ones(n)]
    if scales is None:
        scales = np.logspace(-2, 3, 11)

    def e(x):
        return 0.5 * float(a @ x) ** 2

    def grad(x):
        return a * float(a @ x)

    out_v, out_m, out_w = [], [], []
    for mu in mus:
        if not mu > 0:
            raise ValueError("mu must be positive")
        worst, wit = -math.inf, None
        for x in base_points:
            x = np.asarray(x, dtype=np.float64)
            for s in scales:
                if s == 0:
                    continue
                y = x + s * h
                gy = grad(y)
                rhs = e(y - gy / L) + float(gy @ gy) / (2 * L) + float(gy @ (x - y)) \
                    + 0.5 * mu * float((x - y) @ (x - y))
                viol = rhs - e(x)
                if viol > worst:
                    worst, wit = viol, tuple(np.concatenate([x, y]).tolist())
        out_v.append(worst > SLACK_TOL)
        out_m.append(worst)
        out_w.append(wit)
    return SmoothFailureReport(tuple(mus), tuple(out_v), tuple(out_m), tuple(out_w))
