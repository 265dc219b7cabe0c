"""Gradient-type methods with full per-iteration traces.

All one-operator methods share :func:`abstract_gradient`, the update
``x_{k+1} = x_k - h G(x_k)``. Gradient descent, the proximal point method
and forward-backward splitting are that loop with a particular operator and
step, which makes their specialization identities hold bit for bit.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import __version__
from .core import (
    AffineSet,
    CompositeG,
    FiniteSet,
    Gradient,
    MoreauGradient,
    ObjectiveModel,
    OutsideDomain,
    ProxGradientResidual,
    as_point,
    evaluate,
    objective_prox,
    operator_name,
    prox_gradient_point,
    residual,
)

__all__ = [
    "SolverTrace",
    "SolverConfig",
    "DivergenceError",
    "gradient_descent",
    "abstract_gradient",
    "ppa",
    "fbs",
    "palm",
    "nesterov_afb",
    "nesterov_coefficients",
    "bisect_theta",
    "run",
]

DEFAULT_STOP_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000
_BLOWUP = 1e3


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SolverTrace:
    """Per-iteration record of a run.

    ``aux`` maps names to arrays indexed by ``k``: scalar series (``S``,
    ``Phi``, ``lyapunov``) end up as CSV columns, vector series (``y``,
    ``z``, ``prox``) only in the JSON form.
    """

    method: str
    x: np.ndarray
    gap: np.ndarray
    dist: np.ndarray
    resid: np.ndarray
    aux: Mapping[str, np.ndarray] = field(default_factory=dict)
    status: str = "converged"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("x", "gap", "dist", "resid"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "aux", {k: _frozen(v) for k, v in self.aux.items()})
        object.__setattr__(self, "params", dict(self.params))

    def __len__(self):
        return self.gap.size

    @property
    def iterations(self) -> int:
        return self.gap.size - 1

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def metric(self, name: str) -> np.ndarray:
        """Scalar series by name: ``dist2``, ``gap``, ``S``, ``Phi``, ``lyapunov``, ``resid``."""
        if name in ("dist2", "dist^2"):
            return self.dist**2
        if name == "gap":
            return self.gap
        if name == "resid":
            return self.resid
        if name in self.aux and self.aux[name].ndim == 1:
            return self.aux[name]
        raise KeyError(f"trace of {self.method} has no metric {name!r}")

    def scalar_aux(self) -> list[str]:
        return sorted(k for k, v in self.aux.items() if v.ndim == 1)

    def to_csv(self, dest=None, *, seed=None, problem_hash=None) -> str:
        """Write ``k,gap,dist,resid[,aux...]`` rows with ``%.17g`` formatting.

        The first line is a ``#`` comment with tool version, seed and problem
        hash. Returns the CSV text; also writes it to ``dest`` (path or text stream).
        """
        cols = self.scalar_aux()
        buf = io.StringIO(newline="")
        buf.write(f"# ebconv {__version__} method={self.method} seed={seed} "
                  f"problem={problem_hash}\n")
        buf.write(",".join(["k", "gap", "dist", "resid"] + cols) + "\n")
        for k in range(len(self)):
            vals = [self.gap[k], self.dist[k], self.resid[k]] + [self.aux[c][k] for c in cols]
            buf.write(str(k) + "," + ",".join("%.17g" % v for v in vals) + "\n")
        text = buf.getvalue()
        if hasattr(dest, "write"):
            dest.write(text)
        elif dest is not None:
            with open(os.fspath(dest), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        def clean(a):
            return np.where(np.isfinite(a), a, np.nan).tolist()

        return {
            "method": self.method,
            "status": self.status,
            "params": {k: (float(v) if isinstance(v, (int, float)) else v)
                       for k, v in sorted(self.params.items())},
            "x": self.x.tolist(),
            "gap": clean(self.gap),
            "dist": clean(self.dist),
            "resid": clean(self.resid),
            "aux": {k: v.tolist() for k, v in sorted(self.aux.items())},
        }


class DivergenceError(RuntimeError):
    """The objective gap blew up past ``1e3`` times its initial value."""

    def __init__(self, message, trace: SolverTrace | None = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    """Run configuration shared by all methods.

    ``method`` is one of ``gd``, ``abstract``, ``ppa``, ``fbs``, ``palm`` and
    ``nesterov``; the remaining fields are read by the methods that need them.
    """

    method: str
    x0: tuple
    h: float | str | None = None
    t: float | None = None
    lam: float | None = None
    mu: float | None = None
    L: float | None = None
    theta: float | None = None
    tau: float | None = None
    operator: object = None
    max_iter: int = DEFAULT_MAX_ITER
    stop_tol: float = DEFAULT_STOP_TOL

    def __post_init__(self):
        if self.method not in ("gd", "abstract", "ppa", "fbs", "palm", "nesterov"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        object.__setattr__(self, "x0", tuple(as_point(self.x0).tolist()))
        if self.method == "nesterov" and self.mu is not None and self.L is not None:
            if not 0 < self.mu < self.L:
                raise ValueError("Nesterov's scheme needs 0 < mu < L")


class _Recorder:
    def __init__(self, model):
        self.model = model
        self.xs, self.gaps, self.dists, self.resids = [], [], [], []
        self.gap0 = None

    def add(self, x, gnorm):
        gap = evaluate(self.model, x) - self.model.critical_set.min_value
        self.xs.append(np.array(x))
        self.gaps.append(gap)
        self.dists.append(self.model.critical_set.distance(x))
        self.resids.append(gnorm)
        if self.gap0 is None:
            self.gap0 = gap

    def diverged(self) -> bool:
        g = self.gaps[-1]
        if not np.isfinite(g) or not np.all(np.isfinite(self.xs[-1])):
            return True
        return g > _BLOWUP * abs(self.gap0) and g > 1e-12

    def trace(self, method, status, params, aux=None) -> SolverTrace:
        return SolverTrace(method, np.array(self.xs), np.array(self.gaps),
                           np.array(self.dists), np.array(self.resids),
                           aux or {}, status, params)


def _divergence(rec, method, params, k):
    tr = rec.trace(method, "diverged", params)
    return DivergenceError(
        f"{method}: gap {rec.gaps[-1]:.3g} exceeds {_BLOWUP:g} x initial gap "
        f"{rec.gap0:.3g} at iteration {k}", tr)


def _defaults(config):
    if config is None:
        return DEFAULT_MAX_ITER, DEFAULT_STOP_TOL
    return config.max_iter, config.stop_tol


def _step_rule(model, operator, h):
    # x - t R_t(x) and x - lam grad f_lam(x) are proximal points; taking the
    # point itself keeps iterates exactly inside box constraints
    if isinstance(operator, ProxGradientResidual) and h == operator.t:
        return lambda x, G: prox_gradient_point(model, x, h)
    if isinstance(operator, MoreauGradient) and h == operator.lam:
        return lambda x, G: objective_prox(model, x, h)
    return lambda x, G: x - h * G


def abstract_gradient(model, operator, h: float, x0, config: SolverConfig | None = None,
                      *, method: str = "abstract", params: dict | None = None) -> SolverTrace:
    """Run ``x_{k+1} = x_k - h G(x_k)`` for the residual operator ``operator``.

    Stops when ``||G(x_k)|| <= stop_tol`` or after ``max_iter`` steps. When
    ``h`` equals the step built into a prox-gradient or Moreau operator the
    update is evaluated as the corresponding proximal point, which is the
    same vector without the round trip through ``G``.

    Raises
    ------
    DivergenceError
        When the gap exceeds ``1e3`` times its initial value.
    OutsideDomain
        When the operator is undefined at an iterate.
    """
    if not h > 0:
        raise ValueError("step size h must be positive")
    max_iter, tol = _defaults(config)
    params = dict(params or {}, h=float(h))
    params.setdefault("operator", operator_name(operator))
    step = _step_rule(model, operator, h)
    rec = _Recorder(model)
    x = as_point(x0)
    if x.size != model.dim:
        raise ValueError(f"x0 has {x.size} coordinates, model has {model.dim}")
    G = residual(model, operator, x)
    rec.add(x, float(np.linalg.norm(G)))
    status = "max_iter"
    for k in range(max_iter):
        if rec.resids[-1] <= tol:
            status = "converged"
            break
        x = step(x, G)
        try:
            G = residual(model, operator, x)
        except OutsideDomain as exc:
            raise OutsideDomain(f"{method}: iterate {k + 1} left the domain: {exc}") from None
        rec.add(x, float(np.linalg.norm(G)))
        if rec.diverged():
            raise _divergence(rec, method, params, k + 1)
    else:
        if rec.resids[-1] <= tol:
            status = "converged"
    return rec.trace(method, status, params)


def _resolve_h(model, h):
    if isinstance(h, str):
        key = h.replace(" ", "").lower()
        L = model.smooth_lipschitz
        if key == "1/l":
            return 1.0 / L
        if key in ("2/(mu+l)", "2/(l+mu)"):
            if model.strong_convexity is None:
                raise ValueError("the 2/(mu+L) preset needs a known strong convexity modulus")
            return 2.0 / (model.strong_convexity + L)
        raise ValueError(f"unknown step preset {h!r}")
    return float(h)


def gradient_descent(model, h, x0, config: SolverConfig | None = None) -> SolverTrace:
    """Plain gradient descent; ``h`` may be a float or the preset ``"1/L"`` / ``"2/(mu+L)"``."""
    if not model.is_smooth:
        raise ValueError("gradient descent needs g = 0")
    return abstract_gradient(model, Gradient(), _resolve_h(model, h), x0, config, method="gd")


def ppa(model, lam: float, x0, config: SolverConfig | None = None) -> SolverTrace:
    """Proximal point method ``x_{k+1} = prox_{lam phi}(x_k)``.

    Written as a Moreau-gradient step of length ``lam``.
    """
    return abstract_gradient(model, MoreauGradient(lam), lam, x0, config, method="ppa",
                             params={"lam": float(lam)})


def _tail_sums(resid):
    sq = np.asarray(resid) ** 2
    return np.cumsum(sq[::-1])[::-1]


def fbs(model, t: float, x0, config: SolverConfig | None = None) -> SolverTrace:
    """Forward-backward splitting ``x_{k+1} = prox_{tg}(x_k - t grad f(x_k))``.

    The trace carries ``S`` (tail sums of squared residual norms over the
    realized run) and ``params["truncation_slack"] = 2 gap_K / t``, an upper
    bound on the part of each tail sum lost by stopping at ``K``.
    """
    op = ProxGradientResidual(t)
    tr = abstract_gradient(model, op, t, x0, config, method="fbs", params={"t": float(t)})
    S = _tail_sums(tr.resid)
    params = dict(tr.params, truncation_slack=2.0 * max(tr.gap[-1], 0.0) / t)
    return SolverTrace(tr.method, tr.x, tr.gap, tr.dist, tr.resid, {"S": S}, tr.status, params)


def _block_step(xj, gj, t, simple, idx):
    # same arithmetic as the FBS update so a single block reproduces it
    return simple.prox(xj - t * gj, t, idx)


def palm(model: ObjectiveModel, x0, config: SolverConfig | None = None) -> SolverTrace:
    """Cyclic block prox-gradient sweeps with block moduli ``L_j``.

    Each block uses the partial gradient at the partially updated point.
    One trace entry per sweep; ``resid`` is the full prox-gradient residual
    at ``t = 1/L``.
    """
    if not model.blocks:
        raise ValueError("PALM needs a model with blocks")
    max_iter, tol = _defaults(config)
    L = model.smooth_lipschitz
    op = ProxGradientResidual(1.0 / L)
    params = {"p": len(model.blocks)}
    rec = _Recorder(model)
    x = as_point(x0)
    if x.size != model.dim:
        raise ValueError(f"x0 has {x.size} coordinates, model has {model.dim}")
    rec.add(x, float(np.linalg.norm(residual(model, op, x))))
    status = "max_iter"
    for k in range(max_iter):
        if rec.resids[-1] <= tol:
            status = "converged"
            break
        x = x.copy()
        for blk in model.blocks:
            sl = blk.slice
            g = model.smooth_gradient(x)[sl]
            x[sl] = _block_step(x[sl], g, 1.0 / blk.lipschitz, model.simple, sl)
        rec.add(x, float(np.linalg.norm(residual(model, op, x))))
        if rec.diverged():
            raise _divergence(rec, "palm", params, k + 1)
    else:
        if rec.resids[-1] <= tol:
            status = "converged"
    return rec.trace("palm", status, params)


# ---------------------------------------------------------------------------
# accelerated forward-backward


def nesterov_coefficients(mu: float, L: float) -> dict:
    """``alpha``, ``beta``, ``gamma`` and the default ``tau`` of the accelerated scheme."""
    if not 0 < mu < L:
        raise ValueError("need 0 < mu < L")
    sL, sm = math.sqrt(L), math.sqrt(mu)
    return {
        "alpha": (sL - sm) / (sL + sm),
        "beta": 2 * sm / (sL + sm),
        "gamma": (1 + math.sqrt(L / mu)) / (2 * L),
        "tau_default": 2 * L * mu / (sL + sm) ** 2,
    }


def _tau_for(theta, c):
    rho = max(c["alpha"], theta)
    return theta * c["beta"] / (2 * rho * c["gamma"]), rho


def _unique_minimizer(model):
    crit = model.critical_set
    if isinstance(crit, AffineSet) and crit.null_basis.shape[1] > 0:
        raise ValueError("the accelerated scheme needs a unique minimizer")
    if isinstance(crit, FiniteSet) and len(crit.points_) > 1:
        raise ValueError("the accelerated scheme needs a unique minimizer")
    return crit.points()[0]


def nesterov_afb(model, mu: float, L: float, x0, config: SolverConfig | None = None, *,
                 theta: float | None = None, tau: float | None = None) -> SolverTrace:
    """Accelerated forward-backward with constant momentum, ``x_{-1} = x_0``.

    ``y_k = x_k + alpha (x_k - x_{k-1})`` and ``x_{k+1} = y_k - G(y_k) / L``.
    The trace records ``y``, ``z`` and the Lyapunov values ``Phi`` (with
    ``tau`` from ``theta``, or the default ``2 L mu / (sqrt(L) + sqrt(mu))^2``)
    and ``lyapunov`` (``gap + mu/2 ||w_k - x*||^2`` with
    ``w_k = (1 + sqrt(L/mu)) y_k - sqrt(L/mu) x_k``).
    """
    c = nesterov_coefficients(mu, L)
    x_star = _unique_minimizer(model)
    if tau is None:
        tau = c["tau_default"] if theta is None else _tau_for(theta, c)[0]
    max_iter, tol = _defaults(config)
    op = CompositeG(L)
    a = c["alpha"]
    q = math.sqrt(L / mu)
    params = {"mu": float(mu), "L": float(L), "tau": float(tau), "alpha": a}
    if theta is not None:
        params["theta"] = float(theta)
    rec = _Recorder(model)
    ys, zs, zd, phis, lyap = [], [], [], [], []
    x_prev = x = as_point(x0)
    if x.size != model.dim:
        raise ValueError(f"x0 has {x.size} coordinates, model has {model.dim}")
    status = "max_iter"
    for k in range(max_iter + 1):
        rec.add(x, float(np.linalg.norm(residual(model, op, x))))
        y = x + a * (x - x_prev)
        z = 0.5 * (1 + q) * y + 0.5 * (1 - q) * x
        w = (1 + q) * y - q * x
        ys.append(y)
        zs.append(z)
        zd.append(float((z - x_star) @ (z - x_star)))
        phis.append(rec.gaps[-1] + tau * zd[-1])
        lyap.append(rec.gaps[-1] + 0.5 * mu * float((w - x_star) @ (w - x_star)))
        if k > 0 and rec.diverged():
            aux = {"y": ys, "z": zs, "z_dist2": zd, "Phi": phis, "lyapunov": lyap}
            raise DivergenceError("nesterov: divergence", rec.trace("nesterov", "diverged",
                                                                     params, aux))
        if rec.resids[-1] <= tol:
            status = "converged"
            break
        if k == max_iter:
            break
        x_prev, x = x, y - residual(model, op, y) / L
    aux = {"y": np.array(ys), "z": np.array(zs), "z_dist2": np.array(zd),
           "Phi": np.array(phis), "lyapunov": np.array(lyap)}
    return rec.trace("nesterov", status, params, aux)


def bisect_theta(trace: SolverTrace, mu: float, L: float, *, rtol: float = 1e-9,
                 tol: float = 1e-8) -> tuple[float, float] | None:
    """Smallest ``theta`` in ``(0, 1)`` with ``Phi_{k+1} <= rho Phi_k`` along ``trace``.

    ``Phi`` is recomputed from the recorded gaps and ``z_k`` for each trial
    ``theta`` (``tau = theta beta / (2 rho gamma)``, ``rho = max(alpha, theta)``).
    Feasibility is assumed monotone in ``theta``. Returns ``(theta, rho)``,
    or ``None`` when even ``theta`` close to 1 fails on this trace.
    """
    c = nesterov_coefficients(mu, L)
    zx = trace.aux.get("z_dist2")
    if zx is None:
        raise KeyError("trace lacks z_dist2; produce it with nesterov_afb")
    gap = trace.gap

    def feasible(theta):
        tau, rho = _tau_for(theta, c)
        phi = gap + tau * zx
        den = phi[:-1]
        ok = den > 0
        return bool(np.all(phi[1:][ok] <= rho * den[ok] * (1 + rtol)))

    hi = 1.0 - 1e-12
    if not feasible(hi):
        return None
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi, max(c["alpha"], hi)


def run(model, config: SolverConfig) -> SolverTrace:
    """Dispatch on ``config.method``."""
    m = config.method
    x0 = config.x0
    if m == "gd":
        return gradient_descent(model, config.h if config.h is not None else "1/L", x0, config)
    if m == "abstract":
        if config.operator is None or config.h is None:
            raise ValueError("abstract method needs an operator and a step h")
        return abstract_gradient(model, config.operator, _resolve_h(model, config.h), x0, config)
    if m == "ppa":
        if config.lam is None:
            raise ValueError("PPA needs lam")
        return ppa(model, config.lam, x0, config)
    if m == "fbs":
        t = config.t if config.t is not None else 1.0 / model.smooth_lipschitz
        return fbs(model, t, x0, config)
    if m == "palm":
        return palm(model, x0, config)
    mu = config.mu if config.mu is not None else model.strong_convexity
    L = config.L if config.L is not None else model.smooth_lipschitz
    if mu is None:
        raise ValueError("Nesterov's scheme needs mu")
    return nesterov_afb(model, mu, L, x0, config, theta=config.theta, tau=config.tau)
