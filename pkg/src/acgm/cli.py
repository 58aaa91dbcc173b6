"""Command line interface: ``acgm run | compare | bounds | verify``.

Options may come from flags or a JSON file given with ``--config``; flags
win. JSON keys are the long flag names with dashes or underscores
(``"budget_wtu": 2000``). ``ACGM_OUTPUT_DIR`` sets the directory for CSV
files written without an explicit ``--output``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

from .analysis import GuaranteeParams, acgm_guarantee_floor
from .bench.images import pgm_read
from .bench.problems import (
    DEBLUR_LAMBDA,
    DEBLUR_NOISE_STD,
    HUBER_EPS,
    HUBER_LAMBDA,
    HUBER_NOISE_STD,
    Instance,
    deblur_instance,
    huber_rof_instance,
    lasso_synthetic,
    quadratic_l1_known,
)
from .linesearch import CRITERIA, LineSearchParams
from .solvers import AMGS_CONDITIONS, METHODS, Trace, run
from .verify import FAULTS, run_checks

__all__ = ["main", "build_parser", "build_instance", "TRACE_COLUMNS", "OUTPUT_DIR_ENV"]

PROBLEMS = ("lasso_synthetic", "deblur", "huber_rof_dual", "quadratic_l1_known")
TRACE_COLUMNS = ("k", "wtu", "F", "L", "A", "backtracks")
OUTPUT_DIR_ENV = "ACGM_OUTPUT_DIR"

# settings that define the problem instance; compare requires them to agree
INSTANCE_KEYS = ("problem", "size", "image", "seed", "lam", "eps", "noise_std", "mu_f", "mu_psi")

DEFAULTS = {
    "problem": "quadratic_l1_known",
    "solver": "acgm_ex",
    "size": None,
    "image": None,
    "seed": 0,
    "lam": None,
    "eps": None,
    "noise_std": None,
    "L0": None,
    "r_u": 2.0,
    "r_d": 0.9,
    "criterion": "oracle_descent",
    "amgs_condition": "descent",
    "L_f": None,
    "mu_f": None,
    "mu_psi": None,
    "budget_iters": None,
    "budget_wtu": None,
    "output": None,
    "jobs": 1,
}


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# configuration


def _load_json(path: str) -> Dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    out = {}
    for key, value in raw.items():
        k = key.replace("-", "_")
        if k == "lambda":
            k = "lam"
        if k not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        out[k] = value
    return out


def _merge(flags: argparse.Namespace, config_paths: Sequence[str]) -> List[Dict]:
    """One resolved settings dict per config file (or one if none given)."""
    given = {k: v for k, v in vars(flags).items() if k in DEFAULTS and v is not None}
    layers = [_load_json(p) for p in config_paths] or [{}]
    return [{**DEFAULTS, **layer, **given} for layer in layers]


def _check(cfg: Dict) -> None:
    if cfg["problem"] not in PROBLEMS:
        raise ConfigError(f"unknown problem {cfg['problem']!r}; choose from {PROBLEMS}")
    if cfg["solver"] not in METHODS:
        raise ConfigError(f"unknown solver {cfg['solver']!r}; choose from {METHODS}")
    if cfg["budget_iters"] is not None and cfg["budget_wtu"] is not None:
        raise ConfigError("give either an iteration or a WTU budget, not both")
    for key in ("budget_iters", "budget_wtu"):
        if cfg[key] is not None and (not isinstance(cfg[key], int) or cfg[key] < 0):
            raise ConfigError(f"{key} must be a nonnegative integer")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be at least 1")


def build_instance(cfg: Dict) -> Instance:
    """Problem instance and starting point described by a settings dict."""
    name, seed = cfg["problem"], int(cfg["seed"])
    image = pgm_read(cfg["image"]) if cfg["image"] else None
    if name == "deblur":
        inst = deblur_instance(cfg["size"] or 64, seed,
                               DEBLUR_LAMBDA if cfg["lam"] is None else cfg["lam"],
                               DEBLUR_NOISE_STD if cfg["noise_std"] is None else cfg["noise_std"],
                               image)
    elif name == "huber_rof_dual":
        inst = huber_rof_instance(cfg["size"] or 64, seed,
                                  HUBER_LAMBDA if cfg["lam"] is None else cfg["lam"],
                                  HUBER_EPS if cfg["eps"] is None else cfg["eps"],
                                  HUBER_NOISE_STD if cfg["noise_std"] is None else cfg["noise_std"],
                                  image)
    elif name == "lasso_synthetic":
        n = cfg["size"] or 100
        inst = lasso_synthetic(max(n * 3 // 5, 1), n, seed, cfg["lam"])
    else:
        inst = quadratic_l1_known(cfg["size"] or 20, seed,
                                  mu=cfg["mu_f"] or 0.0,
                                  lam=0.5 if cfg["lam"] is None else cfg["lam"])
    overrides = {k: float(cfg[k]) for k in ("mu_f", "mu_psi") if cfg[k] is not None}
    if overrides:
        try:
            inst = dataclasses.replace(inst, problem=dataclasses.replace(inst.problem, **overrides))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return inst


def _solve(cfg: Dict, inst: Instance) -> Trace:
    p = inst.problem
    L0 = cfg["L0"] if cfg["L0"] is not None else (p.lf_hint or 1.0)
    try:
        params = LineSearchParams(L0=float(L0), r_u=float(cfg["r_u"]), r_d=float(cfg["r_d"]),
                                  criterion=cfg["criterion"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    iters, wtu = cfg["budget_iters"], cfg["budget_wtu"]
    if iters is None and wtu is None:
        iters = 100
    try:
        return run(cfg["solver"], p, inst.x0, params, max_iterations=iters, max_wtu=wtu,
                   L_f=cfg["L_f"], amgs_condition=cfg["amgs_condition"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output


def _output_path(cfg: Dict, default_name: str) -> str:
    if cfg.get("output"):
        return cfg["output"]
    return os.path.join(os.environ.get(OUTPUT_DIR_ENV, "."), default_name)


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", newline=""), True


def _rows(trace: Trace):
    for r in trace.records:
        yield [_fmt(getattr(r, c)) for c in TRACE_COLUMNS]


def write_trace_csv(fh, traces: Sequence[Trace], solver_column: bool) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow((["solver"] if solver_column else []) + list(TRACE_COLUMNS))
    for tr in traces:
        for row in _rows(tr):
            w.writerow(([tr.method] if solver_column else []) + row)


# ---------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    (cfg,) = _merge(args, [args.config] if args.config else [])
    _check(cfg)
    trace = _solve(cfg, build_instance(cfg))
    path = _output_path(cfg, f"{cfg['problem']}_{cfg['solver']}.csv")
    fh, close = _open_out(path)
    try:
        write_trace_csv(fh, [trace], solver_column=False)
    finally:
        if close:
            fh.close()
    if not trace.ok:
        print(f"error: {trace.error}; partial trace written to {path}", file=sys.stderr)
        return 1
    return 0


def cmd_compare(args) -> int:
    cfgs = _merge(args, args.config or [])
    if args.solvers:
        names = [s for item in args.solvers for s in item.split(",") if s]
        cfgs = [{**cfgs[0], "solver": s} for s in names]
    for cfg in cfgs:
        _check(cfg)
    first = cfgs[0]
    for cfg in cfgs[1:]:
        diff = [k for k in INSTANCE_KEYS if cfg[k] != first[k]]
        if diff:
            raise ConfigError(f"configs describe different problems (differ in {', '.join(diff)})")
    inst = build_instance(first)
    with ThreadPoolExecutor(max_workers=min(first["jobs"], len(cfgs))) as pool:
        traces = list(pool.map(lambda c: _solve(c, inst), cfgs))
    path = _output_path(first, f"{first['problem']}_compare.csv")
    fh, close = _open_out(path)
    try:
        write_trace_csv(fh, traces, solver_column=True)
    finally:
        if close:
            fh.close()
    failed = [t for t in traces if not t.ok]
    for t in failed:
        print(f"error: {t.method}: {t.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_bounds(args) -> int:
    if args.K < 0:
        raise ConfigError("K must be nonnegative")
    try:
        gp = GuaranteeParams(args.L_u, args.mu_f, args.mu_psi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if gp.q_u >= 1.0:
        raise ConfigError(f"q_u = {gp.q_u:.6g} must be below 1")
    half_d2 = 0.5 * args.dist0 ** 2
    fh, close = _open_out(args.output or _output_path({}, "bounds.csv"))
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "floor_A", "envelope_F_gap"])
        for k in range(1, args.K + 1):
            floor = acgm_guarantee_floor(k, gp)
            w.writerow([k, _fmt(floor), _fmt(half_d2 / floor if math.isfinite(floor) else 0.0)])
    finally:
        if close:
            fh.close()
    return 0


def cmd_verify(args) -> int:
    results = run_checks(fault=args.inject_fault, seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.detail})")
    failed = sum(not r.passed for r in results)
    print(f"{len(results)} checks run, {failed} failed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser


def _solver_options(p: argparse.ArgumentParser, multi_config: bool = False) -> None:
    if multi_config:
        p.add_argument("--config", action="append", help="JSON settings; repeat for one solver each")
    else:
        p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--size", type=int, help="image side or number of unknowns")
    p.add_argument("--image", help="PGM file used instead of the synthetic image")
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam", type=float, help="regularization weight")
    p.add_argument("--eps", type=float, help="Huber smoothing (huber_rof_dual)")
    p.add_argument("--noise-std", type=float)
    p.add_argument("--L0", type=float, help="initial Lipschitz estimate (default: known L_f)")
    p.add_argument("--r-u", type=float)
    p.add_argument("--r-d", type=float)
    p.add_argument("--criterion", choices=CRITERIA)
    p.add_argument("--amgs-condition", choices=AMGS_CONDITIONS)
    p.add_argument("--L-f", dest="L_f", type=float,
                   help="Lipschitz constant for fista_cp and fgm (default: estimated)")
    p.add_argument("--mu-f", type=float)
    p.add_argument("--mu-psi", type=float)
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--budget-iters", type=int)
    budget.add_argument("--budget-wtu", type=int)
    p.add_argument("--output", "-o", help=f"CSV path, '-' for stdout (default: ${OUTPUT_DIR_ENV} or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acgm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one solver and write its trace")
    _solver_options(p)
    p.add_argument("--solver", choices=METHODS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several solvers on one problem")
    _solver_options(p, multi_config=True)
    p.add_argument("--solvers", action="append", help="comma-separated solver names")
    p.add_argument("--jobs", type=int, help="solvers run concurrently")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bounds", help="tabulate the guaranteed weight floor")
    p.add_argument("--L-u", dest="L_u", type=float, required=True)
    p.add_argument("--mu-f", type=float, default=0.0)
    p.add_argument("--mu-psi", type=float, default=0.0)
    p.add_argument("--K", type=int, default=100)
    p.add_argument("--dist0", type=float, default=1.0, help="||x0 - x*||")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run the known-solution self-check suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
