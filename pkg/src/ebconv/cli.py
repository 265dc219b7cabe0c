"""Command-line front end: ``ebconv <subcommand> ...``.

Exit codes: 0 success, 1 bad input or failed precondition, 2 solver
divergence, 3 no observed linear convergence (necessity not applicable).
All JSON is written with sorted keys; CSV uses ``%.17g`` and ``\\n`` line
endings, with a leading ``#`` comment carrying version, seed and problem hash.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .analysis import (
    RATE_CSV_HEADER,
    NecessityNotApplicable,
    implied_constant,
    measure_rate,
    necessity_check,
    predicted_rate,
)
from .core import (
    CompositeG,
    CompositeModel,
    Gradient,
    LeastNormSubgradient,
    MoreauGradient,
    OutsideDomain,
    ProxGradientResidual,
    Region,
    UnsupportedComposite,
)
from .dual import verify_dual_eb
from .eb import EBKind, SamplePlan, draw_samples, check_condition, estimate_constant, \
    verify_implication_chain
from .problems import load_problem, make_invex_1d, make_lasso, make_palm_problem, \
    make_rank_deficient_least_squares, make_strongly_convex_quadratic, problem_hash
from .solvers import DivergenceError, SolverConfig, run

__all__ = ["main", "build_parser"]


class InputError(Exception):
    pass


def _emit_json(obj, dest):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load(args):
    path = args.problem
    if not os.path.exists(path):
        raise InputError(f"problem file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return load_problem(doc), problem_hash(doc)


def _floats(text, n=None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} numbers, got {len(vals)}")
    return vals


def _operator(args, model):
    name = args.operator
    L = getattr(model, "smooth_lipschitz", None)
    if name == "gradient":
        op = Gradient()
    elif name == "least-norm":
        op = LeastNormSubgradient()
    elif name == "prox-grad":
        op = ProxGradientResidual(args.t if args.t is not None else 1.0 / L)
    elif name == "moreau":
        op = MoreauGradient(args.lam if args.lam is not None else 1.0)
    elif name == "composite":
        op = CompositeG(args.L if args.L is not None else L)
    else:
        raise InputError(f"unknown operator {name!r}")
    if isinstance(model, CompositeModel) and not isinstance(op, CompositeG):
        raise InputError(f"operator {name!r} is not available on a composite model")
    return op


def _manifest(args, phash):
    skip = {"func", "threads"}
    params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {"tool": f"ebconv {__version__}", "problem_hash": phash, "seed": args.seed,
            "parameters": params}


def _x0(args, model):
    if args.x0 is None:
        return np.ones(model.dim)
    return np.array(_floats(args.x0, model.dim))


def _config(args, model):
    op = _operator(args, model) if args.method == "abstract" else None
    h = args.h
    if h is not None:
        try:
            h = float(h)
        except ValueError:
            pass
    L = model.smooth_lipschitz
    if args.method == "fbs" and args.t is not None and args.t > 1.0 / L * (1 + 1e-12):
        raise InputError(f"fbs step t={args.t} exceeds 1/L={1.0 / L:g}")
    return SolverConfig(args.method, tuple(_x0(args, model)), h=h, t=args.t, lam=args.lam,
                        mu=args.mu, L=args.L, theta=args.theta, operator=op,
                        max_iter=args.max_iter, stop_tol=args.stop_tol)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    model, phash = _load(args)
    trace = run(model, _config(args, model))
    if args.out:
        trace.to_csv(args.out, seed=args.seed, problem_hash=phash)
    else:
        sys.stdout.write(trace.to_csv(seed=args.seed, problem_hash=phash))
    if args.report:
        rate = measure_rate(trace, args.metric, args.burn_in)
        _emit_json({"manifest": _manifest(args, phash), "status": trace.status,
                    "iterations": trace.iterations, "rate": rate.to_dict()}, args.report)
    return 0


def _plan(args):
    return SamplePlan(Region(args.region_r), args.samples, args.seed, args.strategy)


def cmd_estimate_eb(args) -> int:
    model, phash = _load(args)
    op = _operator(args, model)
    if args.chain:
        return _chain(args, model, op, phash)
    kind = EBKind.parse(args.condition)
    samples = draw_samples(model, op, _plan(args), need_residual=kind.needs_residual,
                           threads=args.threads)
    est = estimate_constant(model, op, kind, samples)
    rep = check_condition(model, op, kind, est, samples, samples_csv=args.csv)
    _emit_json({"manifest": _manifest(args, phash), "estimate": est,
                "report": rep.to_dict()}, args.out)
    return 0


def _chain(args, model, op, phash):
    rep = verify_implication_chain(model, op, _plan(args), omega=args.omega,
                                   threads=args.threads)
    _emit_json({"manifest": _manifest(args, phash), "chain": rep.to_dict(),
                "pointwise_passed": rep.pointwise_passed}, args.out)
    return 0


def cmd_chain(args) -> int:
    model, phash = _load(args)
    return _chain(args, model, _operator(args, model), phash)


def _necessity_params(args, model, config, trace):
    p = {"L": model.smooth_lipschitz}
    if args.method == "ppa":
        p["lam"] = args.lam
    if args.method in ("abstract", "gd-basic", "gd"):
        p["h"] = trace.params.get("h")
    if args.method == "abstract":
        p["operator"] = config.operator
        p["beta"] = args.beta if args.beta is not None else 1.0 / model.smooth_lipschitz
    return p


def cmd_necessity(args) -> int:
    model, phash = _load(args)
    solver_method = "gd" if args.method == "gd-basic" else args.method
    ns = argparse.Namespace(**{**vars(args), "method": solver_method})
    config = _config(ns, model)
    trace = run(model, config)
    if trace.status != "converged":
        raise NecessityNotApplicable(
            f"{solver_method} did not reach the stopping tolerance within "
            f"{args.max_iter} iterations; no linear rate observed")
    rate = measure_rate(trace, "dist2", args.burn_in)
    tau = rate.tau_hat_max
    params = _necessity_params(args, model, config, trace)
    plan = SamplePlan(Region(max(float(trace.gap[0]), 1e-12)), args.samples, args.seed,
                      args.strategy)
    rep = necessity_check(model, args.method, tau, params, plan)
    out = {"manifest": _manifest(args, phash), "observed_tau": tau,
           "rate": rate.to_dict(), "report": rep.to_dict()}
    if args.method != "gd-basic":
        out["implied_constant"] = implied_constant(args.method, tau, **params)
    _emit_json(out, args.out)
    return 0


def _parse_consts(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"constants take the form name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = float(v)
        except ValueError:
            raise InputError(f"constant {k!r} is not a number: {v!r}") from None
    return out


def cmd_rates(args) -> int:
    model, phash = _load(args)
    trace = run(model, _config(args, model))
    pred = predicted_rate(args.theorem, **_parse_consts(args.const)) if args.theorem else None
    rate = measure_rate(trace, args.metric, args.burn_in, predicted_tau=pred)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# ebconv {__version__} seed={args.seed} problem={phash}\n")
            fh.write(RATE_CSV_HEADER + "\n")
            fh.write(rate.csv_row(model.name, args.method) + "\n")
    _emit_json({"manifest": _manifest(args, phash), "rate": rate.to_dict(),
                "within_prediction": rate.within_prediction}, args.out)
    return 0


def cmd_dual(args) -> int:
    model, phash = _load(args)
    grid = _floats(args.r_grid)
    rep = verify_dual_eb(model, args.r0, grid, count=args.samples, seed=args.seed,
                         strategy=args.strategy)
    _emit_json({"manifest": _manifest(args, phash), "dual": rep.to_dict()}, args.out)
    return 0


def _report_matrix():
    rng = np.random.default_rng(0)
    A5 = rng.standard_normal((5, 3))
    quad = make_strongly_convex_quadratic(np.diag([1.0, 4.0]), [0.0, 0.0])
    ls = make_rank_deficient_least_squares([[1.0, 1.0]], [1.0])
    lasso = make_lasso(A5, A5 @ np.array([1.0, -0.5, 0.0]), 0.1)
    palm_p = make_palm_problem([[1.0, 1.0]], [1.0], [1, 1], ["zero", "zero"])
    inv = make_invex_1d()
    return [
        (quad, SolverConfig("gd", (1.0, 1.0), h="2/(mu+L)"), "dist2",
         predicted_rate("gd-strongly-convex", mu=1, L=4)),
        (ls, SolverConfig("gd", (0.0, 0.0), h="1/L"), "dist2",
         predicted_rate("gd-rsc", nu=2, L=2)),
        (quad, SolverConfig("gd", (1.0, 1.0), h="1/L"), "gap",
         predicted_rate("gd-gap", nu=1, L=4)),
        (inv, SolverConfig("gd", (0.5,), h="1/L"), "dist2", None),
        (quad, SolverConfig("ppa", (1.0, 1.0), lam=1.0), "dist2",
         predicted_rate("ppa", alpha=1, lam=1)),
        (lasso, SolverConfig("fbs", (0.0, 0.0, 0.0)), "gap", None),
        (palm_p, SolverConfig("palm", (0.0, 0.0)), "gap",
         predicted_rate("palm", eta=2, L_min=1, L_max=1, L=2, p=2)),
        (quad, SolverConfig("nesterov", (1.0, 1.0), mu=1.0, L=4.0, max_iter=200,
                            stop_tol=1e-300), "lyapunov",
         predicted_rate("nesterov-smooth", mu=1, L=4)),
    ]


def cmd_report(args) -> int:
    rows = [f"# ebconv {__version__} seed={args.seed} problem=builtin-matrix",
            RATE_CSV_HEADER]
    details = []
    for model, cfg, metric, pred in _report_matrix():
        trace = run(model, cfg)
        rate = measure_rate(trace, metric, args.burn_in, predicted_tau=pred)
        rows.append(rate.csv_row(model.name, cfg.method))
        details.append({"problem": model.name, "method": cfg.method, **rate.to_dict()})
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json:
        _emit_json({"rates": details}, args.json)
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p, problem=True):
    if problem:
        p.add_argument("--problem", required=True, help="problem JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def _solver_args(p, methods):
    p.add_argument("--method", required=True, choices=methods)
    p.add_argument("--h", default=None, help="step size or preset '1/L', '2/(mu+L)'")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--operator", default="gradient")
    p.add_argument("--x0", default=None, help="comma-separated start point (default: ones)")
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--stop-tol", type=float, default=1e-12)
    p.add_argument("--burn-in", type=int, default=5)


def _sample_args(p):
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--region-r", type=float, default=1.0)
    p.add_argument("--strategy", default="gaussian-rejection",
                   choices=("gaussian-rejection", "ray-from-critical", "grid"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebconv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ebconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    methods = ("gd", "abstract", "ppa", "fbs", "palm", "nesterov")

    p = sub.add_parser("solve", help="run a solver and write its trace")
    _common(p)
    _solver_args(p, methods)
    p.add_argument("--report", default=None, help="RateReport JSON path")
    p.add_argument("--metric", default="dist2")
    p.set_defaults(func=cmd_solve)

    for name, func in (("estimate-eb", cmd_estimate_eb), ("chain", cmd_chain)):
        p = sub.add_parser(name, help="estimate EB constants" if name == "estimate-eb"
                           else "verify the implication chain")
        _common(p)
        _sample_args(p)
        p.add_argument("--condition", default="cor-eb")
        p.add_argument("--operator", default="gradient")
        p.add_argument("--t", type=float, default=None)
        p.add_argument("--lam", type=float, default=None)
        p.add_argument("--L", type=float, default=None)
        p.add_argument("--omega", type=float, default=None)
        p.add_argument("--chain", action="store_true")
        p.add_argument("--csv", default=None, help="per-sample CSV path")
        p.set_defaults(func=func)

    p = sub.add_parser("necessity", help="observed rate -> implied EB constant -> re-check")
    _common(p)
    _solver_args(p, methods + ("gd-basic",))
    _sample_args(p)
    p.add_argument("--beta", type=float, default=None)
    p.set_defaults(func=cmd_necessity)

    p = sub.add_parser("rates", help="measured vs predicted rate")
    _common(p)
    _solver_args(p, methods)
    p.add_argument("--metric", default="dist2")
    p.add_argument("--theorem", default=None)
    p.add_argument("--const", action="append", help="name=value, repeatable")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("dual", help="EB estimates on dual sublevel sets")
    _common(p)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--r-grid", default="0.1,1,10")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--strategy", default="gaussian-rejection")
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("report", help="rate table over the built-in problem matrix")
    _common(p, problem=False)
    p.add_argument("--burn-in", type=int, default=5)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NecessityNotApplicable as exc:
        print(f"ebconv: necessity not applicable: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"ebconv: divergence: {exc}", file=sys.stderr)
        return 2
    except (InputError, ValueError, KeyError, FileNotFoundError, UnsupportedComposite,
            OutsideDomain) as exc:
        print(f"ebconv: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
