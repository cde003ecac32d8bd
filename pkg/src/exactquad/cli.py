"""Command-line front end.

Reads a JSON problem file, dispatches to the library, prints the result as
a single JSON document on stdout and a short human summary on stderr.
Exit codes: 0 success, 2 validation error, 3 numerical failure; failures
emit a machine-readable ``{"kind": ..., "message": ...}`` object on stderr.

Subcommands: ``synthesize``, ``reduce``, ``covwitness``, ``gruss``,
``gruss-discrete``, ``verify``, ``chebyshev-test``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np
from scipy.optimize import minimize

from .errors import ExactQuadError, SchemaError
from .expr import parse as parse_expr
from .hull import (
    CurveSystem,
    combination_from_json,
    combination_to_json,
    reduce_on_curve,
)
from .measure import interval_from_json, measure_from_json
from .stats import covariance_witness, gruss_check, gruss_discrete
from .synth import (
    config_from_json,
    rule_from_json,
    rule_to_json,
    synthesize_rule,
    verify_rule,
)

__all__ = ["run", "main", "chebyshev_sample_test"]


def chebyshev_sample_test(functions, interval, trial_count: int = 200,
                          seed: int = 0) -> dict:
    """Randomized search for a vanishing generalized Vandermonde determinant.

    Draws ``trial_count`` strictly increasing tuples from a seeded 64-bit
    PRNG, evaluates det[x_i(t_j)], then locally minimizes |det| divided by
    the node-gap product (which stays bounded away from zero under node
    coalescence) around the most suspicious tuple.  A tuple of distinct
    points with |det| <= 1e-12 * scale disproves the alternant property;
    finding none is evidence only, not a certificate.
    """
    if isinstance(functions, CurveSystem):
        curve = functions
    else:
        curve = CurveSystem.from_texts(functions, interval)
    lo, hi = curve.interval.lower, curve.interval.upper
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise SchemaError("the determinant test needs a compact interval")
    span = hi - lo
    m = curve.n
    rng = np.random.default_rng(seed)

    def det_and_scale(ts):
        mat = curve.evaluate(ts).T  # rows: functions, columns: points
        det = float(np.linalg.det(mat))
        scale = float(np.prod(np.linalg.norm(mat, axis=0))) + 1e-300
        return det, scale

    best = None  # (ratio, tuple, det, scale)
    for _ in range(trial_count):
        for _ in range(100):
            ts = np.sort(rng.uniform(lo, hi, m))
            if m == 1 or np.min(np.diff(ts)) > 1e-12 * span:
                break
        det, scale = det_and_scale(ts)
        ratio = abs(det) / scale
        if best is None or ratio < best[0]:
            best = (ratio, ts, det, scale)

    def objective(ts):
        ts = np.asarray(ts)
        if np.any(ts < lo) or np.any(ts > hi):
            return np.inf
        order = np.sort(ts)
        if m > 1 and np.min(np.diff(order)) <= 1e-12 * span:
            return np.inf
        mat = curve.evaluate(order).T
        det = abs(float(np.linalg.det(mat)))
        gaps = 1.0
        for i in range(m):
            for j in range(i + 1, m):
                gaps *= order[j] - order[i]
        return det / max(gaps, 1e-300)

    polished = minimize(objective, best[1], method="Nelder-Mead",
                        options={"maxiter": 2000, "xatol": 1e-14,
                                 "fatol": 1e-300})
    t_star = np.sort(np.clip(polished.x, lo, hi))
    det_star, scale_star = det_and_scale(t_star)
    distinct = m == 1 or float(np.min(np.diff(t_star))) > 1e-9 * span
    witness = None
    if distinct and abs(det_star) <= 1e-12 * scale_star:
        witness = {
            "tuple": [float(x) for x in t_star],
            "det": det_star,
            "scale": scale_star,
        }
    return {
        "trials": trial_count,
        "seed": seed,
        "min_abs_det": abs(best[2]),
        "min_scaled_det": best[0],
        "argmin_tuple": [float(x) for x in best[1]],
        "witness": witness,
    }


def _require(obj: dict, what: str, required: tuple[str, ...],
             optional: tuple[str, ...] = ()):
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be a JSON object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise SchemaError(f"unknown field(s) {sorted(unknown)} in {what}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"{what} is missing field(s) {missing}")


def _functions_and_measure(obj):
    _require(obj, "problem", ("functions", "measure"), ("tolerances",))
    texts = obj["functions"]
    if not isinstance(texts, list) or not texts or not all(
        isinstance(s, str) for s in texts
    ):
        raise SchemaError("'functions' must be a non-empty list of strings")
    m = measure_from_json(obj["measure"])
    curve = CurveSystem.from_texts(texts, m.interval)
    return curve, m


def _apply_flags(cfg, args):
    if getattr(args, "tol", None) is not None:
        cfg = config_from_json({"tol": args.tol}, cfg)
    if getattr(args, "grid", None) is not None:
        cfg = config_from_json({"grid0": args.grid}, cfg)
    return cfg


def _cmd_synthesize(obj, args):
    curve, m = _functions_and_measure(obj)
    cfg = _apply_flags(config_from_json(obj.get("tolerances")), args)
    rule = synthesize_rule(curve, m, cfg)
    note = (f"synthesized {len(rule)}-node rule (rank {rule.rank_used}), "
            f"max residual {float(np.max(rule.residuals)):.3e}")
    if not rule.converged:
        note += " [polish stopped above its target; residual gate still met]"
    return rule_to_json(rule), note


def _cmd_verify(obj, args):
    _require(obj, "problem", ("functions", "measure", "rule"), ("tolerances",))
    rule = rule_from_json(obj["rule"])
    curve, m = _functions_and_measure(
        {"functions": obj["functions"], "measure": obj["measure"]}
    )
    report = verify_rule(rule, curve, m)
    note = ("rule verifies: max relative residual "
            f"{float(np.max(report.relative_residuals)):.3e}"
            if report.passed else "rule FAILS verification")
    return report.to_json(), note


def _cmd_reduce(obj, args):
    _require(obj, "problem", ("functions", "interval", "combination"),
             ("tolerances",))
    interval = interval_from_json(obj["interval"])
    texts = obj["functions"]
    if not isinstance(texts, list) or not texts:
        raise SchemaError("'functions' must be a non-empty list of strings")
    curve = CurveSystem.from_texts(texts, interval)
    comb = combination_from_json(obj["combination"])
    points = curve.evaluate(comb.params)
    v = comb.weights @ points / comb.total
    reduced = reduce_on_curve(curve, comb, v)
    note = f"reduced {len(comb)} support points to {len(reduced)}"
    return combination_to_json(reduced), note


def _cmd_covwitness(obj, args):
    _require(obj, "problem", ("f", "g", "measure"), ("tolerances",))
    m = measure_from_json(obj["measure"])
    cfg = _apply_flags(config_from_json(obj.get("tolerances")), args)
    w = covariance_witness(parse_expr(obj["f"]), parse_expr(obj["g"]), m, cfg)
    note = (f"witness t1={w.t1:.6g} t2={w.t2:.6g}, "
            f"covariance {w.covariance:.6g}")
    return w.to_json(), note


def _cmd_gruss(obj, args):
    _require(obj, "problem", ("f", "g", "measure"), ("tolerances",))
    m = measure_from_json(obj["measure"])
    r = gruss_check(parse_expr(obj["f"]), parse_expr(obj["g"]), m)
    note = f"|covariance| {abs(r.covariance):.6g} <= bound {r.bound:.6g}"
    return r.to_json(), note


def _cmd_gruss_discrete(obj, args):
    _require(obj, "problem", ("p", "u", "v"))
    r = gruss_discrete(obj["p"], obj["u"], obj["v"])
    out = r.to_json()
    out["lhs"] = abs(r.covariance)
    note = f"lhs {out['lhs']:.6g} <= bound {r.bound:.6g}"
    return out, note


def _cmd_chebyshev(obj, args):
    _require(obj, "problem", ("functions", "interval"))
    interval = interval_from_json(obj["interval"])
    report = chebyshev_sample_test(obj["functions"], interval,
                                   trial_count=args.trials, seed=args.seed)
    note = ("witness found: the functions are NOT an alternant system"
            if report["witness"] is not None
            else "no vanishing determinant found (evidence only)")
    return report, note


_COMMANDS = {
    "synthesize": _cmd_synthesize,
    "reduce": _cmd_reduce,
    "covwitness": _cmd_covwitness,
    "gruss": _cmd_gruss,
    "gruss-discrete": _cmd_gruss_discrete,
    "verify": _cmd_verify,
    "chebyshev-test": _cmd_chebyshev,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exactquad",
        description="Exact quadrature rules, curve reductions and "
                    "covariance bounds from JSON problem files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("problem", help="path to a JSON problem file, or - for stdin")
        p.add_argument("--tol", type=float, default=None,
                       help="integration tolerance override")
        p.add_argument("--grid", type=int, default=None,
                       help="initial discretization grid override")
        if name == "chebyshev-test":
            p.add_argument("--trials", type=int, default=200)
            p.add_argument("--seed", type=int, default=0)
    return parser


def _emit_error(kind: str, message: str, stderr) -> None:
    print(json.dumps({"kind": kind, "message": message}), file=stderr)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.problem == "-":
            text = sys.stdin.read()
        else:
            with open(args.problem, "r", encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        _emit_error("schema", f"cannot read problem file: {exc}", stderr)
        return 2
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        _emit_error("schema", f"malformed JSON at offset {exc.pos}: {exc.msg}",
                    stderr)
        return 2
    try:
        result, note = _COMMANDS[args.command](obj, args)
    except SchemaError as exc:
        _emit_error(exc.kind, str(exc), stderr)
        return 2
    except ExactQuadError as exc:
        _emit_error(exc.kind, str(exc), stderr)
        return 3
    print(json.dumps(result), file=stdout)
    print(note, file=stderr)
    return 0


def main() -> None:
    sys.exit(run())
