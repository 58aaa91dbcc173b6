"""Self-check suite on problems with a closed-form solution.

Each check runs a solver on a separable quadratic plus L1 instance whose
minimizer is known exactly and tests one guarantee of the method. The suite
is what ``acgm verify`` prints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .analysis import (
    GuaranteeParams,
    acgm_guarantee_floor,
    certify_guarantee,
    gap_sequence,
)
from .bench.images import SplitMix64
from .bench.problems import Instance, quadratic_l1_known
from .linesearch import LineSearchParams, l_upper_bound
from .problem import eval_F, upper_model_Q
from .solvers import run

__all__ = ["CheckResult", "FAULTS", "run_checks", "forced_schedule"]

FAULTS = ("skip-vertex-update",)

GAP_TOL = 1e-9
FLOOR_RTOL = 1e-9
FORM_RTOL = 1e-8
VERTEX_RTOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def forced_schedule(seed: int, length: int, L_f: float, r_u: float = 2.0) -> np.ndarray:
    """A nondecreasing estimate sequence of the kind FISTA's search produces.

    Local curvatures are drawn in ``(0, L_f]``; each step keeps the running
    estimate or multiplies it by ``r_u`` until it covers the curvature.
    """
    curv = L_f * SplitMix64(seed).uniform(length)
    L = curv[0]
    out = np.empty(length)
    for i, c in enumerate(curv):
        while L < c:
            L *= r_u
        out[i] = L
    return out


def _rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300))


def run_checks(fault: Optional[str] = None, seed: int = 0) -> List[CheckResult]:
    """Run every check; ``fault`` deliberately breaks the solver to test the suite."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    update_vertex = fault != "skip-vertex-update"

    L_f = 10.0
    # residual acceptance is exact for quadratics, so rounding in f does not
    # leak into the certificates near convergence
    params = LineSearchParams(L0=3.0, r_u=2.0, r_d=0.9, criterion="quadratic_residual")
    flat = quadratic_l1_known(20, seed=seed, mu=0.0, L=L_f)
    strong = quadratic_l1_known(20, seed=seed + 1, mu=0.5, L=L_f)

    es = run("acgm_es", flat.problem, flat.x0, params, max_iterations=500,
             keep_iterates=True, update_vertex=update_vertex)
    es_strong = run("acgm_es", strong.problem, strong.x0, params, max_iterations=200,
                    keep_iterates=True, update_vertex=update_vertex)

    checks: List[Callable[[], CheckResult]] = [
        lambda: _certificate(es, flat),
        lambda: _gap_monotone(es, flat),
        lambda: _floors(es, es_strong, flat, strong, params, L_f),
        lambda: _weight_comparison(flat, L_f, seed),
        lambda: _form_equivalence(strong, params, update_vertex),
        lambda: _descent(es, flat),
        lambda: _ceiling([es, es_strong], params, L_f),
        lambda: _vertex_extrapolation(es),
    ]
    results = []
    for check in checks:
        try:
            results.append(check())
        except Exception as exc:  # a crashing check is a failing check
            results.append(CheckResult(getattr(check, "__name__", "check"), False,
                                       f"{type(exc).__name__}: {exc}"))
    return results


def _certificate(trace, inst: Instance) -> CheckResult:
    ok = certify_guarantee(trace, inst.x_star, inst.F_star, inst.x0)
    bad = np.flatnonzero(~ok)
    detail = f"{ok.size} iterations" if bad.size == 0 else f"first violation at k={bad[0] + 1}"
    return CheckResult("weighted objective certificate", bool(ok.all()), detail)


def _gap_monotone(trace, inst: Instance) -> CheckResult:
    gaps = gap_sequence(trace, inst.x_star, inst.F_star)
    rise = float(np.max(np.diff(gaps)))
    return CheckResult("gap sequence nonincreasing", rise <= GAP_TOL,
                       f"largest increase {rise:.3g}")


def _floors(flat_trace, strong_trace, flat, strong, params, L_f) -> CheckResult:
    worst = math.inf
    for trace, inst in ((flat_trace, flat), (strong_trace, strong)):
        p = inst.problem
        gp = GuaranteeParams(l_upper_bound(L_f, params.L0, params.r_u, params.r_d),
                             p.mu_f, p.mu_psi)
        for r in trace.records[1:]:
            floor = acgm_guarantee_floor(r.k, gp)
            worst = min(worst, (r.A - floor) / floor)
    return CheckResult("weight floors", worst >= -FLOOR_RTOL,
                       f"smallest relative margin {worst:.3g}")


def _weight_comparison(inst: Instance, L_f: float, seed: int) -> CheckResult:
    worst = math.inf
    for s in range(10):
        sched = forced_schedule(seed * 1000 + s, 1000, L_f)
        a = run("acgm_ex", inst.problem, inst.x0, L_schedule=sched).column("A")
        f = run("fista", inst.problem, inst.x0, L_schedule=sched).column("A")
        worst = min(worst, float(np.min(a[1:] / f[1:] - 1.0)))
    return CheckResult("ACGM weights dominate FISTA weights", worst >= -1e-12,
                       f"smallest relative excess {worst:.3g}")


def _form_equivalence(inst: Instance, params, update_vertex) -> CheckResult:
    es = run("acgm_es", inst.problem, inst.x0, params, max_iterations=100,
             keep_iterates=True, update_vertex=update_vertex)
    ex = run("acgm_ex", inst.problem, inst.x0, params, max_iterations=100,
             keep_iterates=True)
    n = min(len(es.xs), len(ex.xs))
    dev = max(_rel_dev(a, b) for a, b in zip(es.xs[:n], ex.xs[:n]))
    same_len = len(es.xs) == len(ex.xs)
    return CheckResult("both forms give the same iterates", same_len and dev <= FORM_RTOL,
                       f"largest relative deviation {dev:.3g}")


def _descent(trace, inst: Instance) -> CheckResult:
    p = inst.problem
    worst = -math.inf
    for r, x, y in zip(trace.records[1:], trace.xs[1:], trace.ys[1:]):
        Q = upper_model_Q(p, y, r.L, x)
        worst = max(worst, float(p.f(x)) - Q)
        # the composite version of the same rule
        L_eff = r.L + p.mu_psi
        g = L_eff * (y - x)
        worst = max(worst, eval_F(p, x) - (eval_F(p, y) - float(np.dot(g, g)) / (2 * L_eff)))
    scale = max(1.0, abs(inst.F_star))
    return CheckResult("descent rule at accepted steps", worst <= 1e-12 * scale,
                       f"largest excess {worst:.3g}")


def _ceiling(traces, params, L_f) -> CheckResult:
    L_u = l_upper_bound(L_f, params.L0, params.r_u, params.r_d)
    top = max(float(t.column("L")[1:].max()) for t in traces)
    return CheckResult("Lipschitz estimates below ceiling", top <= L_u,
                       f"max L {top:.6g} vs ceiling {L_u:.6g}")


def _vertex_extrapolation(trace) -> CheckResult:
    worst = 0.0
    A = trace.column("A")
    for k in range(len(trace.records) - 1):
        a = A[k + 1] - A[k]
        pred = trace.xs[k] + (A[k + 1] / a) * (trace.xs[k + 1] - trace.xs[k])
        worst = max(worst, _rel_dev(trace.vs[k + 1], pred))
    return CheckResult("vertices extrapolate from iterates", worst <= VERTEX_RTOL,
                       f"largest relative deviation {worst:.3g}")
