"""Command line front-end.

Subcommands read a JSON config (``--config``), validate it against the schemas
below and write CSV grids / JSON reports to ``--out`` (or stdout).

Exit codes: 0 pass, 1 check failure, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import (ConsistencyError, DomainError, ModelError, QuadratureError,
                     SingularSystemError, UnsupportedSizeError)
from .hitting import hit_order_probs
from .models import make_model
from .penalization import (I_vector, I_vector_zero_excursion, PenalizationProblem, PhiFunction,
                           phi, phi_base, phi_two_point_closed, solve)
from .quadrature import QuadratureConfig
from .resolvent import HFunctionEvaluator
from .simulator import ClockSpec, MCConfig, clock_sweep, martingale_check, sample_penalized, weighted_expectation

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_points = {"type": "array", "items": _num, "minItems": 1}

MODEL_SCHEMA = {
    "type": "object",
    "properties": {"kind": {"enum": ["bm", "stable", "bm_cp"]}, "sigma": _pos, "alpha": _num,
                   "c": _pos, "rate": _pos, "jump_decay": _pos},
    "required": ["kind"],
    "additionalProperties": False,
}
QUAD_SCHEMA = {
    "type": "object",
    "properties": {"abs_tol": _pos, "rel_tol": _pos, "panel_budget": {"type": "integer", "minimum": 1},
                   "lambda_max": _pos},
    "additionalProperties": False,
}
GAMMA = {"type": "number", "minimum": -1, "maximum": 1}
PROBLEM_SCHEMA = {
    "type": "object",
    "properties": {"points": _points, "weights": {"type": "array", "items": _pos, "minItems": 1},
                   "gamma": GAMMA},
    "required": ["points", "weights"],
    "additionalProperties": False,
}
CLOCK_SCHEMA = {
    "type": "object",
    "properties": {"kind": {"enum": ["exponential", "one_hit", "two_hit", "inverse_local_time"]},
                   "q": _pos, "b": _num, "c": _pos, "d": _pos, "u": {"type": "number", "minimum": 0}},
    "required": ["kind"],
    "additionalProperties": False,
}
_common = {"model": MODEL_SCHEMA, "quad": QUAD_SCHEMA, "seed": {"type": "integer", "minimum": 0}}

SCHEMAS = {
    "hfun": {"type": "object", "additionalProperties": False, "required": ["model", "x_grid"],
             "properties": {**_common, "gamma": GAMMA, "x_grid": _points}},
    "hit": {"type": "object", "additionalProperties": False, "required": ["model", "x", "points"],
            "properties": {**_common, "x": _num, "points": _points,
                           "method": {"enum": ["auto", "solve", "mc"]},
                           "n_paths": {"type": "integer", "minimum": 2}}},
    "phi": {"type": "object", "additionalProperties": False,
            "required": ["model", "points", "weights", "x_grid"],
            "properties": {**_common, **PROBLEM_SCHEMA["properties"], "x_grid": _points}},
    "identity": {"type": "object", "additionalProperties": False, "required": ["model"],
                 "properties": {**_common, "problems": {"type": "array", "items": PROBLEM_SCHEMA},
                                "x_grid": _points, "tolerance": _pos}},
    "verify": {"type": "object", "additionalProperties": False, "required": ["model"],
               "properties": {**_common, "problems": {"type": "array", "items": PROBLEM_SCHEMA},
                              "x_grid": _points, "tolerance": _pos}},
    "simulate": {"type": "object", "additionalProperties": False,
                 "required": ["model", "problem", "x", "task"],
                 "properties": {**_common, "problem": PROBLEM_SCHEMA, "x": _num,
                                "task": {"enum": ["expectation", "sweep", "martingale", "penalized"]},
                                "clock": CLOCK_SCHEMA, "clocks": {"type": "array", "items": CLOCK_SCHEMA},
                                "times": _points, "t_horizon": _pos,
                                "n_paths": {"type": "integer", "minimum": 2},
                                "batch_size": {"type": "integer", "minimum": 1},
                                "dt": _pos, "horizon": _pos, "kappa": _pos,
                                "required": {"type": "boolean"}}},
}

DEFAULT_PROBLEMS = [
    {"points": [0.0, 1.0], "weights": [1.0, 1.0]},
    {"points": [0.0, 1.0], "weights": [2.0, 0.5]},
    {"points": [-1.0, 0.5], "weights": [0.7, 3.0]},
    {"points": [0.0, 1.0, -1.0], "weights": [1.0, 1.0, 1.0]},
    {"points": [-0.5, 0.3, 2.0], "weights": [0.5, 2.0, 1.5]},
]
DEFAULT_GRID = [-2.5, -1.0, -0.2, 0.0, 0.25, 0.5, 0.9, 1.0, 1.7, 3.0]


class UsageError(Exception):
    pass


def _evaluator(cfg):
    quad = QuadratureConfig(**cfg["quad"]) if "quad" in cfg else None
    return HFunctionEvaluator(make_model(cfg["model"]), quad)


def _problem(block, gamma=None):
    g = block.get("gamma", 0.0) if gamma is None else gamma
    return PenalizationProblem(tuple(block["points"]), tuple(block["weights"]), g)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


# ----------------------------------------------------------------------------
# commands: each returns (exit_code, {filename: text})

def cmd_hfun(cfg, opts):
    ev = _evaluator(cfg)
    g = cfg.get("gamma", 0.0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "h", "h_gamma", "h_B"])
    for x in cfg["x_grid"]:
        w.writerow([repr(float(x)), repr(ev.h(x)), repr(ev.h_gamma(g, x)), repr(ev.h_B(x))])
    return EXIT_OK, {"hfun.csv": buf.getvalue()}


def cmd_hit(cfg, opts):
    ev = _evaluator(cfg)
    mc = MCConfig(n_paths=cfg.get("n_paths", 100_000), seed=opts.seed, threads=opts.threads)
    res = hit_order_probs(ev, cfg["x"], cfg["points"], method=cfg.get("method", "auto"), mc=mc)
    out = {"probs": res.entries, "residual": res.residual, "method": res.method, "flags": res.flags}
    if res.std_errors is not None:
        out["std_errors"] = res.std_errors
    return EXIT_OK, {"hit.json": _json(out)}


def cmd_phi(cfg, opts):
    ev = _evaluator(cfg)
    prob = _problem(cfg)
    sol = solve(ev, prob)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "phi_base", "phi", "phi_closed", "flags"])
    for x in cfg["x_grid"]:
        base = phi_base(ev, prob, x) if prob.n > 1 else float("nan")
        val = phi(ev, prob, x, _solution=sol)
        closed = phi_two_point_closed(ev, prob, x) if prob.n == 2 else float("nan")
        w.writerow([repr(float(x)), repr(base), repr(val), repr(closed), ";".join(sol.flags)])
    summary = {"J": sol.J, "I": sol.I_gamma, "a_vec": sol.a_vec, "condition_number": sol.condition_number,
               "residual": sol.residual, "flags": sol.flags, "version": __version__}
    return EXIT_OK, {"phi.csv": buf.getvalue(), "phi.json": _json(summary)}


def _check(checks, cid, ref, observed, expected, tol):
    ok = bool(abs(observed - expected) <= tol)
    checks.append({"id": cid, "reference": ref, "status": "pass" if ok else "fail",
                   "observed": float(observed), "expected": float(expected), "tolerance": tol})


def _below(checks, cid, ref, observed, bound):
    ok = bool(observed < bound)
    checks.append({"id": cid, "reference": ref, "status": "pass" if ok else "fail",
                   "observed": float(observed), "expected": f"< {bound!r}", "tolerance": 0.0})


def _flag_check(checks, cid, ref, exc):
    checks.append({"id": cid, "reference": ref, "status": "flagged", "observed": None,
                   "expected": None, "tolerance": None, "error": str(exc)})


def _identity_checks(ev, problems, grid, tol, checks):
    for pi, block in enumerate(problems):
        prob = _problem(block, 0.0)
        if prob.n == 2:
            for g in (-1.0, 0.0, 1.0):
                pg = prob.with_gamma(g)
                sol = solve(ev, pg)
                for x in grid:
                    _check(checks, f"P{pi}/two_point/g={g}/x={x}", "two-point closed form of phi",
                           phi(ev, pg, x, _solution=sol), phi_two_point_closed(ev, pg, x), tol)
        if 2 <= prob.n <= 3:
            a = I_vector(ev, prob)
            b = I_vector_zero_excursion(ev, prob)
            for k in range(prob.n):
                _check(checks, f"P{pi}/I_zero_excursion/k={k}",
                       "gamma=0 I-vector from excursion rates", a[k], b[k], max(tol, 1e-8))


def _run_checks(fn, name):
    checks = []
    try:
        fn(checks)
    except (QuadratureError, SingularSystemError, ConsistencyError) as exc:
        _flag_check(checks, f"{name}/numerical", "numerical failure", exc)
    failed = any(c["status"] != "pass" for c in checks)
    report = {"suite": name, "version": __version__, "checks": checks,
              "passed": sum(c["status"] == "pass" for c in checks),
              "failed": sum(c["status"] == "fail" for c in checks),
              "flagged": sum(c["status"] == "flagged" for c in checks)}
    return (EXIT_FAIL if failed else EXIT_OK), report


def cmd_identity(cfg, opts):
    ev = _evaluator(cfg)
    problems = cfg.get("problems", DEFAULT_PROBLEMS)
    grid = cfg.get("x_grid", DEFAULT_GRID)
    tol = cfg.get("tolerance", 1e-10)
    code, rep = _run_checks(lambda ch: _identity_checks(ev, problems, grid, tol, ch), "identity")
    return code, {"identity.json": _json(rep)}


def cmd_verify(cfg, opts):
    ev = _evaluator(cfg)
    problems = cfg.get("problems", DEFAULT_PROBLEMS)
    grid = cfg.get("x_grid", DEFAULT_GRID)
    tol = cfg.get("tolerance", 1e-10)
    infinite = math.isinf(ev.second_moment)

    def run(checks):
        _identity_checks(ev, problems, grid, tol, checks)
        for pi, block in enumerate(problems):
            prob = _problem(block, 0.0)
            sol = solve(ev, prob)
            for k, s in enumerate(sol.J.sum(axis=1)):
                _below(checks, f"P{pi}/J_row_sum/k={k}", "row sums of J below one", s, 1.0 - 1e-6)
            fp, fm = PhiFunction(ev, prob.with_gamma(1.0)), PhiFunction(ev, prob.with_gamma(-1.0))
            for g in (-0.5, 0.3):
                fg = PhiFunction(ev, prob.with_gamma(g))
                for x in grid:
                    mix = 0.5 * (1 + g) * fp.values([x])[0] + 0.5 * (1 - g) * fm.values([x])[0]
                    _check(checks, f"P{pi}/gamma_mix/g={g}/x={x}", "phi affine in gamma",
                           fg.values([x])[0], mix, max(tol, 1e-12))
                    if infinite:
                        _check(checks, f"P{pi}/gamma_free/g={g}/x={x}",
                               "phi independent of gamma for infinite variance",
                               fg.values([x])[0], fp.values([x])[0], max(tol, 1e-12))
            for x in grid:
                v = PhiFunction(ev, prob).values([x])[0]
                _below(checks, f"P{pi}/phi_positive/x={x}", "phi positive", -v, 0.0)

    code, rep = _run_checks(run, "verify")
    return code, {"verify.json": _json(rep)}


def _clock(block):
    return ClockSpec(**block)


def cmd_simulate(cfg, opts):
    ev = _evaluator(cfg)
    prob = _problem(cfg["problem"])
    kw = {k: cfg[k] for k in ("n_paths", "batch_size", "dt", "horizon", "kappa") if k in cfg}
    mc = MCConfig(seed=opts.seed if opts.seed is not None else cfg.get("seed", MCConfig.seed),
                  threads=opts.threads, **kw)
    x = cfg["x"]
    task = cfg["task"]
    files = {}
    required = cfg.get("required", False)
    status = "pass"
    if task == "expectation":
        if "clock" not in cfg:
            raise UsageError("task 'expectation' needs a 'clock' block")
        est = weighted_expectation(ev.model, prob, x, _clock(cfg["clock"]), mc)
        out = {"estimate": est.mean, "stderr": est.std_error, "ess": None, "flags": est.flags}
    elif task == "sweep":
        if "clocks" not in cfg:
            raise UsageError("task 'sweep' needs a 'clocks' list")
        rows = clock_sweep(ev, prob, x, [_clock(c) for c in cfg["clocks"]], mc)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "estimate", "stderr", "rescale", "rescaled", "rescaled_stderr", "target", "flags"])
        for r in rows:
            w.writerow([r.param, repr(r.estimate.mean), repr(r.estimate.std_error), repr(r.rescale),
                        repr(r.rescaled), repr(r.rescaled_se), repr(r.target), ";".join(r.estimate.flags)])
        files["sweep.csv"] = buf.getvalue()
        last = rows[-1]
        ok = abs(last.rescaled - last.target) <= max(3 * last.rescaled_se, 0.05 * abs(last.target))
        status = "pass" if ok else "fail"
        out = {"estimate": last.rescaled, "stderr": last.rescaled_se, "target": last.target, "ess": None,
               "flags": last.estimate.flags}
    elif task == "martingale":
        times = cfg.get("times", [0.5, 1.0, 2.0])
        ests = martingale_check(ev, prob, x, times, mc)
        ok = all(abs(e.mean - 1.0) <= 3 * e.std_error for e in ests)
        status = "pass" if ok else "fail"
        out = {"times": times, "estimate": [e.mean for e in ests], "stderr": [e.std_error for e in ests],
               "ess": None, "flags": ests[0].flags}
    else:
        ws = sample_penalized(ev, prob, x, cfg.get("t_horizon", 1.0), mc)
        est = ws.expectation(np.ones_like(ws.weights))
        ok = abs(est.mean - 1.0) <= 3 * est.std_error
        status = "pass" if ok else "fail"
        out = {"estimate": est.mean, "stderr": est.std_error, "ess": ws.ess, "flags": ws.flags}
    out.update({"status": status, "seed": mc.seed, "n_paths": mc.n_paths, "version": __version__})
    files["simulate.json"] = _json(out)
    flagged = bool(out["flags"]) and any("above_threshold" in f or "low_effective" in f for f in out["flags"])
    code = EXIT_FAIL if (status == "fail" or (required and flagged)) else EXIT_OK
    return code, files


COMMANDS = {"hfun": cmd_hfun, "hit": cmd_hit, "phi": cmd_phi, "identity": cmd_identity,
            "verify": cmd_verify, "simulate": cmd_simulate}


def build_parser():
    p = argparse.ArgumentParser(prog="levypen", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes for Monte Carlo")
    p.add_argument("--out", default=None, help="output directory (default: stdout)")
    p.add_argument("--version", action="version", version=__version__)
    return p


def load_config(path, command):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise UsageError(f"config does not match the {command} schema: {exc.message}") from exc
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is None:
            args.seed = cfg.get("seed", MCConfig.seed)
        code, files = COMMANDS[args.command](cfg, args)
    except (UsageError, ModelError, DomainError, UnsupportedSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, SingularSystemError, ConsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    else:
        for name, text in files.items():
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
