"""Measured Q-linear rates, predicted rates and the necessity pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Gradient, MoreauGradient, ProxGradientResidual, operator_name
from .eb import EBCheckReport, EBKind, SLACK_TOL, SamplePlan, check_condition, draw_samples
from .solvers import SolverTrace

__all__ = [
    "RateReport",
    "measure_rate",
    "predicted_rate",
    "THEOREMS",
    "RATE_IDS",
    "RATE_ALIASES",
    "StepWindow",
    "stepsize_window",
    "NecessityNotApplicable",
    "implied_constant",
    "necessity_check",
    "DENOM_FLOOR",
]

#: Ratios are only formed where the denominator exceeds this value.
DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class RateReport:
    """Per-step ratios ``m_{k+1} / m_k`` of one metric along a trace."""

    metric: str
    ratios: tuple
    tau_hat_max: float
    tau_hat_geo: float
    predicted_tau: float | None
    burn_in: int
    status: str = "ok"

    @property
    def within_prediction(self) -> bool | None:
        if self.predicted_tau is None:
            return None
        # tight bounds are met exactly in exact arithmetic; allow last-bit rounding
        return self.tau_hat_max <= self.predicted_tau * (1 + 1e-12)

    def csv_row(self, problem: str, method: str) -> str:
        pred = "" if self.predicted_tau is None else "%.17g" % self.predicted_tau
        return ",".join([problem, method, self.metric, "%.17g" % self.tau_hat_max,
                         "%.17g" % self.tau_hat_geo, pred, str(self.burn_in), self.status])

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "ratios": [float(r) for r in self.ratios],
            "tau_hat_max": float(self.tau_hat_max),
            "tau_hat_geo": float(self.tau_hat_geo),
            "predicted_tau": None if self.predicted_tau is None else float(self.predicted_tau),
            "burn_in": self.burn_in,
            "status": self.status,
        }


RATE_CSV_HEADER = "problem,method,metric,tau_hat_max,tau_hat_geo,predicted_tau,burn_in,status"


def measure_rate(trace: SolverTrace, metric: str = "dist2", burn_in: int = 5,
                 predicted_tau: float | None = None, floor: float = DENOM_FLOOR) -> RateReport:
    """Measure Q-linear ratios of ``metric`` after ``burn_in`` iterations.

    Ratios run from ``burn_in`` over the consecutive stretch where the
    denominator stays above ``floor``. A metric that is already at or
    below ``floor`` after the burn-in gives status ``"already converged"``.

    Examples
    --------
    >>> from ebconv.problems import make_strongly_convex_quadratic
    >>> from ebconv.solvers import gradient_descent
    >>> q = make_strongly_convex_quadratic([[1.0]], [0.0])
    >>> measure_rate(gradient_descent(q, 1.0, [3.0]), "dist2").status
    'already converged'
    """
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    # gaps can dip below zero by rounding once the minimum is reached
    m = np.maximum(np.asarray(trace.metric(metric), dtype=np.float64), 0.0)
    tail = m[burn_in:]
    if tail.size == 0 or tail[0] <= floor:
        if m.size and m[-1] <= floor:
            return RateReport(metric, (), 0.0, 0.0, predicted_tau, burn_in, "already converged")
        raise ValueError(f"trace too short for burn_in={burn_in}: {m.size} entries")
    stop = tail.size - 1
    below = np.nonzero(tail[:-1] <= floor)[0]
    if below.size:
        stop = int(below[0])
    if stop < 1:
        if m.size < burn_in + 3 and tail[-1] > floor:
            raise ValueError(f"trace too short for burn_in={burn_in}: {m.size} entries")
        return RateReport(metric, (), 0.0, 0.0, predicted_tau, burn_in, "already converged")
    ratios = tail[1:stop + 1] / tail[:stop]
    with np.errstate(divide="ignore"):
        geo = float(np.exp(np.mean(np.log(ratios))))
    mx = float(ratios.max())
    return RateReport(metric, tuple(float(r) for r in ratios), mx, min(geo, mx),
                      predicted_tau, burn_in, "ok")


# ---------------------------------------------------------------------------
# predicted rates


def _need(c, *names):
    missing = [n for n in names if c.get(n) is None]
    if missing:
        raise ValueError(f"missing constants: {', '.join(missing)}")
    vals = [float(c[n]) for n in names]
    for n, v in zip(names, vals):
        if not v > 0:
            raise ValueError(f"{n} must be positive, got {v}")
    return vals


def _ssc(c):
    mu, L = _need(c, "mu", "L")
    if mu > L:
        raise ValueError("need mu <= L")
    return ((L - mu) / (L + mu)) ** 2


def _rsc(c):
    nu, L = _need(c, "nu", "L")
    if nu > L:
        raise ValueError("need nu <= L")
    return 1 - nu / L


def _regularity(c):
    alpha, beta = _need(c, "alpha", "beta")
    if alpha * beta <= 4:
        raise ValueError(f"the regularity rate needs alpha * beta > 4, got {alpha * beta:g}")
    return 1 - 4 / (alpha * beta)


def _abstract(c):
    beta, nu = _need(c, "beta", "nu")
    if beta * nu > 1 + 1e-12:
        raise ValueError("need nu <= 1/beta")
    return max(1 - beta * nu, 0.0)


def _gd_gap(c):
    nu, L = _need(c, "nu", "L")
    if nu > L:
        raise ValueError("need nu <= L")
    return 1 - (nu / L) ** 2


def _ppa(c):
    alpha, lam = _need(c, "alpha", "lam")
    return 1 - min(alpha * lam / 4, 0.25)


def _fbs(c):
    nu, L = _need(c, "nu", "L")
    if nu >= 2 * L:
        raise ValueError("need nu < 2L")
    return 1 - nu / (2 * L)


def _palm(c):
    eta, lmin, lmax, L, p = _need(c, "eta", "L_min", "L_max", "L", "p")
    if lmin > lmax:
        raise ValueError("need L_min <= L_max")
    return 1.0 / (eta**2 * lmin / (4 * p * L**2 + 4 * lmax**2) + 1)


def _nesterov_smooth(c):
    mu, L = _need(c, "mu", "L")
    if mu > L:
        raise ValueError("need mu <= L")
    return 1 - math.sqrt(mu / L)


def _nesterov_composite(c):
    mu, L, theta = _need(c, "mu", "L", "theta")
    if not (mu < L and theta < 1):
        raise ValueError("need mu < L and theta < 1")
    alpha = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
    return max(alpha, theta)


THEOREMS = {
    "gd-strongly-convex": _ssc,
    "gd-rsc": _rsc,
    "gd-regularity": _regularity,
    "abstract-gradient": _abstract,
    "gd-gap": _gd_gap,
    "gd-dist": _rsc,
    "ppa": _ppa,
    "fbs": _fbs,
    "palm": _palm,
    "nesterov-smooth": _nesterov_smooth,
    "nesterov-composite": _nesterov_composite,
}

#: Canonical rate identifiers accepted by :func:`predicted_rate`.
RATE_IDS = tuple(THEOREMS)

#: Alternative identifiers kept for interface compatibility.
RATE_ALIASES = {
    "S3-smooth-strongly-convex": "gd-strongly-convex",
    "S3-RSC": "gd-rsc",
    "S3-regularity": "gd-regularity",
    "T51-abstract": "abstract-gradient",
    "C52-gd-gap": "gd-gap",
    "C52-gd-dist": "gd-dist",
    "C54-ppa": "ppa",
    "C56-fbs": "fbs",
    "T61-palm": "palm",
    "qlin1-nesterov": "nesterov-smooth",
    "T72-nesterov": "nesterov-composite",
}


def predicted_rate(theorem: str, **constants) -> float:
    """Predicted per-step contraction factor for the named rate bound.

    Examples
    --------
    >>> predicted_rate("gd-strongly-convex", mu=1, L=4)
    0.36
    >>> predicted_rate("ppa", alpha=1, lam=1)
    0.75
    """
    try:
        fn = THEOREMS[RATE_ALIASES.get(theorem, theorem)]
    except KeyError:
        raise ValueError(f"unknown rate identifier {theorem!r}; known: {list(RATE_IDS)}") from None
    return float(fn(constants))


class StepWindow(NamedTuple):
    lo: float
    hi: float
    tau_bound: float
    feasible: bool


def stepsize_window(theta: float, nu: float, beta: float, tau: float | None = None) -> StepWindow:
    """Admissible steps ``(1 - tau)/(2 theta nu) <= h <= 2 (1 - theta) beta``.

    ``tau`` defaults to its smallest admissible value ``1 - 4 theta (1 - theta) beta nu``,
    at which the window collapses to the single step ``2 (1 - theta) beta``.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not (nu > 0 and beta > 0):
        raise ValueError("nu and beta must be positive")
    if nu * beta >= 1:
        raise ValueError("the window needs nu < 1/beta")
    tau_bound = 1 - 4 * theta * (1 - theta) * beta * nu
    if tau is None:
        tau = tau_bound
    elif tau < tau_bound - 1e-15:
        raise ValueError(f"tau={tau} is below the admissible bound {tau_bound}")
    hi = 2 * (1 - theta) * beta
    lo = (1 - tau) / (2 * theta * nu)
    if tau == tau_bound:
        lo = min(lo, hi)  # equal in exact arithmetic
    feasible = hi > 1e-9 * beta and lo <= hi * (1 + 1e-12)
    return StepWindow(lo, hi, tau_bound, feasible)


# ---------------------------------------------------------------------------
# necessity


class NecessityNotApplicable(ValueError):
    """The observed rate is not linear (``tau >= 1``), so no constant follows."""


_NECESSITY_METHODS = ("gd-basic", "abstract", "gd", "ppa", "fbs")


def implied_constant(method: str, observed_tau: float, **params) -> float:
    """EB constant implied by an observed linear rate.

    ``abstract``: ``beta (1 - sqrt tau)^2 / h^2``; ``gd``: ``L (1 - sqrt tau)^2``;
    ``ppa``: ``(1 - sqrt tau)^2 / (2 lam)``; ``fbs``: ``(L/2) (1 - sqrt tau)^2``.
    """
    if not observed_tau < 1:
        raise NecessityNotApplicable(f"observed rate {observed_tau} is not linear")
    if observed_tau < 0:
        raise ValueError("observed rate must be nonnegative")
    s = (1 - math.sqrt(observed_tau)) ** 2
    if method == "abstract":
        return params["beta"] * s / params["h"] ** 2
    if method == "gd":
        return params["L"] * s
    if method == "ppa":
        return s / (2 * params["lam"])
    if method == "fbs":
        return params["L"] * s / 2
    raise ValueError(f"no necessity formula for method {method!r}")


def _basic_condition(model, observed_tau, h, plan) -> EBCheckReport:
    # inf_u <grad f, x - u> >= (1 - tau)/(2h) d^2 + (h/2) ||grad f||^2
    L = model.smooth_lipschitz
    if h > (1 - math.sqrt(observed_tau)) / L * (1 + 1e-12):
        raise ValueError(f"the basic condition follows only for h <= (1 - sqrt(tau))/L "
                         f"= {(1 - math.sqrt(observed_tau)) / L}")
    s = plan if not isinstance(plan, SamplePlan) else draw_samples(model, Gradient(), plan)
    lhs = s.inner
    rhs = (1 - observed_tau) / (2 * h) * s.d**2 + 0.5 * h * s.gnorm**2
    slack = lhs - rhs
    mask = rhs > 1e-16
    ratio = np.full(lhs.shape, np.inf)
    ratio[mask] = lhs[mask] / rhs[mask]
    ok = bool(np.all(slack >= -SLACK_TOL))
    idx = int(np.argmin(slack)) if not ok else int(np.argmin(ratio))
    return EBCheckReport("basic", operator_name(Gradient()), 1.0, "pass" if ok else "fail",
                         float(ratio.min()) if mask.any() else math.inf,
                         tuple(float(v) for v in s.xs[idx]), len(s), s.skipped)


def necessity_check(model, method: str, observed_tau: float, params: dict,
                    plan) -> EBCheckReport:
    """Turn an observed linear rate into an EB constant and re-check it.

    Parameters
    ----------
    method : {"gd-basic", "abstract", "gd", "ppa", "fbs"}
        Which converse statement to apply. ``abstract`` needs ``h``,
        ``beta`` and an ``operator`` in ``params``; ``ppa`` needs ``lam``;
        ``gd``/``fbs`` use ``params["L"]`` or the model's modulus;
        ``gd-basic`` needs ``h``.
    observed_tau : float
        Measured ``tau_hat_max`` on the squared distance.
    plan : SamplePlan or SampleSet
        Samples from the run's sublevel region.

    Returns
    -------
    EBCheckReport
        The cor-EB check (obj-EB for ``ppa``) at the implied constant, stored
        as ``claimed_constant``.

    Raises
    ------
    NecessityNotApplicable
        When ``observed_tau >= 1``.
    """
    if method not in _NECESSITY_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {_NECESSITY_METHODS}")
    if not observed_tau < 1:
        raise NecessityNotApplicable(f"observed rate {observed_tau} is not linear")
    params = dict(params)
    params.setdefault("L", model.smooth_lipschitz)
    if method == "gd-basic":
        return _basic_condition(model, observed_tau, params["h"], plan)
    if method == "ppa":
        lam = params["lam"]
        alpha = implied_constant("ppa", observed_tau, lam=lam)
        return check_condition(model, MoreauGradient(lam), EBKind.OBJ, alpha, plan)
    if method == "gd":
        op = Gradient()
    elif method == "fbs":
        op = ProxGradientResidual(1.0 / params["L"])
    else:
        op = params["operator"]
    nu = implied_constant(method, observed_tau, **params)
    return check_condition(model, op, EBKind.COR, nu, plan)
