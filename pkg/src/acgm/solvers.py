"""Accelerated first-order methods for composite problems.

ACGM comes in two algebraically equivalent forms: the estimate-sequence form
keeps the vertex ``v_k`` and weights ``A_k``, ``gamma_k`` explicitly; the
extrapolated form only keeps the last two iterates and the scalar ``t_k``.
The baselines are FISTA with a non-decreasing backtracking search, FISTA-CP
(extrapolated ACGM with the estimate frozen at the Lipschitz constant), AMGS
and FGM.

Every method is split into a *trial* at a given Lipschitz estimate and a
*commit* of an accepted trial, so the same pieces serve the line search, the
fixed-step variants, and runs with a prescribed estimate schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import metering
from .linesearch import (
    LineSearchError,
    LineSearchParams,
    SearchOutcome,
    backtracking_search,
    descent_accepts,
    descent_tolerance,
    quadratic_residual_accepts,
)
from .problem import CompositeProblem, eval_F, prox_grad_step, transfer_convexity

__all__ = [
    "METHODS",
    "AcgmEsState",
    "AcgmExState",
    "FistaState",
    "AmgsState",
    "FgmState",
    "Trial",
    "TraceRecord",
    "Trace",
    "acgm_weight_a",
    "amgs_weight_a",
    "t_update",
    "fista_t_update",
    "extrapolation_beta",
    "fista_weight_update",
    "acgm_es_init",
    "acgm_es_trial",
    "acgm_es_commit",
    "acgm_es_iteration",
    "acgm_ex_init",
    "acgm_ex_trial",
    "acgm_ex_commit",
    "acgm_ex_iteration",
    "fista_init",
    "fista_iteration",
    "fista_cp_iteration",
    "amgs_init",
    "amgs_iteration",
    "fgm_init",
    "fgm_iteration",
    "run",
]

METHODS = ("acgm_es", "acgm_ex", "fista", "fista_cp", "amgs", "fgm")

AMGS_CONDITIONS = ("descent", "damped_relaxation")


# ---------------------------------------------------------------------------
# Scalar recursions


def acgm_weight_a(gamma: float, A: float, mu: float, mu_f: float, L: float) -> float:
    """Positive root ``a`` of ``(L + mu_psi) a^2 = (A + a)(gamma + mu a)``.

    ``mu_psi = mu - mu_f``; the quadratic has leading coefficient ``L - mu_f``.
    """
    c = L - mu_f
    if not c > 0:
        raise ValueError(f"Lipschitz estimate {L} must exceed mu_f = {mu_f}")
    s = gamma + A * mu
    return (s + math.sqrt(s * s + 4.0 * c * A * gamma)) / (2.0 * c)


def amgs_weight_a(A: float, mu: float, L: float) -> float:
    """Positive root ``a`` of ``L a^2 = 2 (A + a)(1 + mu A)``."""
    if not L > 0:
        raise ValueError("L must be positive")
    h = 1.0 + mu * A
    return (h + math.sqrt(h * h + 2.0 * L * h * A)) / L


def t_update(t: float, q: float, L_prev_eff: float, L_trial_eff: float) -> float:
    """Positive root of ``s^2 + s (q t^2 - 1) - (L_trial_eff / L_prev_eff) t^2 = 0``."""
    if not (L_prev_eff > 0 and L_trial_eff > 0):
        raise ValueError("effective estimates must be positive")
    b = 1.0 - q * t * t
    c = (L_trial_eff / L_prev_eff) * t * t
    root = math.sqrt(b * b + 4.0 * c)
    if b >= 0:
        return 0.5 * (b + root)
    # avoids cancellation once q t^2 exceeds one
    return 2.0 * c / (root - b)


def fista_t_update(t: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def extrapolation_beta(t: float, t_next: float, q_next: float) -> float:
    """Momentum ``(t - 1)/t_next * (1 - q_next t_next)/(1 - q_next)``."""
    if q_next >= 1.0:
        raise ValueError("q = 1: the problem is solved by a single gradient step")
    if not t_next > 0:
        raise ValueError("t_next must be positive")
    return (t - 1.0) / t_next * (1.0 - q_next * t_next) / (1.0 - q_next)


def fista_weight_update(A: float, L_prev: float, L_next: float) -> float:
    """Accumulated weight FISTA earns for one step at estimate ``L_next``."""
    h = 1.0 / (4.0 * L_next)
    return (math.sqrt(h) + math.sqrt(h + (L_prev / L_next) * A)) ** 2


# ---------------------------------------------------------------------------
# States and trials


@dataclass(frozen=True)
class Trial:
    """One evaluation of a method at a trial estimate ``L``."""

    L: float
    y: np.ndarray
    x: np.ndarray
    fy: float
    gy: np.ndarray
    fx: float
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AcgmEsState:
    x: np.ndarray
    v: np.ndarray
    A: float
    gamma: float
    L: float
    k: int = 0
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class AcgmExState:
    """Extrapolated-form state.

    ``A`` and ``gamma`` are carried only for reporting; the iterates do not
    depend on them.
    """

    x: np.ndarray
    x_prev: np.ndarray
    t: float
    q: float
    L: float
    k: int = 0
    A: float = 0.0
    gamma: float = 1.0
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FistaState:
    x: np.ndarray
    x_prev: np.ndarray
    t: float
    L: float
    A: float = 0.0
    k: int = 0
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class AmgsState:
    """AMGS state; ``v`` minimizes the estimate function and ``s`` is the
    accumulated gradient point it is the prox of."""

    x: np.ndarray
    v: np.ndarray
    s: np.ndarray
    A: float
    L: float
    x0: np.ndarray
    k: int = 0
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FgmState:
    x: np.ndarray
    v: np.ndarray
    A: float
    gamma: float
    L_f: float
    k: int = 0
    y: Optional[np.ndarray] = None


def _evaluate(problem: CompositeProblem, L: float, y: np.ndarray, **extra) -> Trial:
    fy = float(problem.f(y))
    gy = problem.grad(y)
    x = prox_grad_step(problem, y, L, gy=gy)
    fx = float(problem.f(x))
    return Trial(L=L, y=y, x=x, fy=fy, gy=gy, fx=fx, extra=extra)


def _acceptor(problem: CompositeProblem, criterion: str):
    if criterion == "oracle_descent":
        return lambda tr, L: descent_accepts(problem, tr.y, tr.x, L,
                                             fy=tr.fy, gy=tr.gy, fx=tr.fx)
    if criterion == "quadratic_residual":
        if problem.quad_op is None:
            raise TypeError("quadratic_residual criterion requires a quadratic problem")
        return lambda tr, L: quadratic_residual_accepts(problem.quad_op, tr.y, tr.x, L,
                                                        problem.quad_scale)
    raise ValueError(f"unknown criterion {criterion!r}")


# ---------------------------------------------------------------------------
# ACGM, estimate-sequence form


def acgm_es_init(x0: np.ndarray, L0: float) -> AcgmEsState:
    x0 = np.array(x0, dtype=float, copy=True)
    return AcgmEsState(x=x0, v=x0, A=0.0, gamma=1.0, L=float(L0))


def acgm_es_trial(problem: CompositeProblem, state: AcgmEsState, L: float) -> Trial:
    mu = problem.mu
    a = acgm_weight_a(state.gamma, state.A, mu, problem.mu_f, L)
    gamma_next = state.gamma + a * mu
    if state.A == 0.0:
        y = state.v
    else:
        w_x = state.A * gamma_next
        w_v = a * state.gamma
        y = (w_x * state.x + w_v * state.v) / (w_x + w_v)
    return _evaluate(problem, L, y, a=a, A=state.A + a, gamma=gamma_next)


def acgm_es_commit(problem: CompositeProblem, state: AcgmEsState, trial: Trial,
                   update_vertex: bool = True) -> AcgmEsState:
    """Accept ``trial``. ``update_vertex=False`` is a fault switch used to
    check that the verification suite notices a broken method."""
    a, gamma_next = trial.extra["a"], trial.extra["gamma"]
    if update_vertex:
        v = (state.gamma * state.v
             + a * (trial.L + problem.mu_psi) * trial.x
             - a * (trial.L - problem.mu_f) * trial.y) / gamma_next
    else:
        v = state.v
    return AcgmEsState(x=trial.x, v=v, A=trial.extra["A"], gamma=gamma_next,
                       L=trial.L, k=state.k + 1, y=trial.y)


def acgm_es_iteration(problem: CompositeProblem, params: LineSearchParams,
                      state: AcgmEsState, update_vertex: bool = True):
    """One backtracked iteration; returns ``(new_state, SearchOutcome)``."""
    out = backtracking_search(params, state.L,
                              lambda L: acgm_es_trial(problem, state, L),
                              _acceptor(problem, params.criterion),
                              lower_limit=problem.mu_f)
    return acgm_es_commit(problem, state, out.trial, update_vertex), out


# ---------------------------------------------------------------------------
# ACGM, extrapolated form


def acgm_ex_init(problem: CompositeProblem, x0: np.ndarray, L0: float) -> AcgmExState:
    x0 = np.array(x0, dtype=float, copy=True)
    return AcgmExState(x=x0, x_prev=x0, t=0.0, q=problem.mu / (L0 + problem.mu_psi),
                       L=float(L0))


def acgm_ex_trial(problem: CompositeProblem, state: AcgmExState, L: float) -> Trial:
    if not L > problem.mu_f:
        raise ValueError(f"Lipschitz estimate {L} must exceed mu_f = {problem.mu_f}")
    mu_psi = problem.mu_psi
    q_next = problem.mu / (L + mu_psi)
    t_next = t_update(state.t, state.q, state.L + mu_psi, L + mu_psi)
    beta = extrapolation_beta(state.t, t_next, q_next)
    y = state.x + beta * (state.x - state.x_prev)
    return _evaluate(problem, L, y, q=q_next, t=t_next)


def acgm_ex_commit(problem: CompositeProblem, state: AcgmExState, trial: Trial) -> AcgmExState:
    a = acgm_weight_a(state.gamma, state.A, problem.mu, problem.mu_f, trial.L)
    return AcgmExState(x=trial.x, x_prev=state.x, t=trial.extra["t"], q=trial.extra["q"],
                       L=trial.L, k=state.k + 1, A=state.A + a,
                       gamma=state.gamma + a * problem.mu, y=trial.y)


def acgm_ex_iteration(problem: CompositeProblem, params: LineSearchParams,
                      state: AcgmExState):
    out = backtracking_search(params, state.L,
                              lambda L: acgm_ex_trial(problem, state, L),
                              _acceptor(problem, params.criterion),
                              lower_limit=problem.mu_f)
    return acgm_ex_commit(problem, state, out.trial), out


def fista_cp_iteration(problem: CompositeProblem, L_f: float, state: AcgmExState):
    """Extrapolated ACGM with the estimate frozen at ``L_f``."""
    trial = acgm_ex_trial(problem, state, L_f)
    return acgm_ex_commit(problem, state, trial), SearchOutcome(L_f, trial, 0)


# ---------------------------------------------------------------------------
# FISTA


def fista_init(x0: np.ndarray, L0: float) -> FistaState:
    x0 = np.array(x0, dtype=float, copy=True)
    return FistaState(x=x0, x_prev=x0, t=0.0, L=float(L0))


def _fista_trial(problem: CompositeProblem, state: FistaState, L: float) -> Trial:
    t_next = fista_t_update(state.t)
    y = state.x + ((state.t - 1.0) / t_next) * (state.x - state.x_prev)
    return _evaluate(problem, L, y, t=t_next)


def fista_iteration(problem: CompositeProblem, params: LineSearchParams, state: FistaState):
    """FISTA step; the search never lowers the estimate."""
    out = backtracking_search(params, state.L,
                              lambda L: _fista_trial(problem, state, L),
                              _acceptor(problem, params.criterion), r_d=1.0)
    tr = out.trial
    A = fista_weight_update(state.A, state.L, tr.L)
    return FistaState(x=tr.x, x_prev=state.x, t=tr.extra["t"], L=tr.L, A=A,
                      k=state.k + 1, y=tr.y), out


# ---------------------------------------------------------------------------
# AMGS


def _amgs_problem(problem: CompositeProblem, x0: np.ndarray) -> CompositeProblem:
    # all strong convexity lives in the regularizer
    if problem.mu_f == 0.0:
        return problem
    return transfer_convexity(problem, -problem.mu_f, x0)


def amgs_init(x0: np.ndarray, L0: float) -> AmgsState:
    x0 = np.array(x0, dtype=float, copy=True)
    return AmgsState(x=x0, v=x0, s=x0, A=0.0, L=float(L0), x0=x0)


def _amgs_trial(problem: CompositeProblem, state: AmgsState, L: float,
                with_grad: bool) -> Trial:
    a = amgs_weight_a(state.A, problem.mu, L)
    y = state.v if state.A == 0.0 else (state.A * state.x + a * state.v) / (state.A + a)
    tr = _evaluate(problem, L, y, a=a)
    if with_grad:
        tr.extra["gx"] = problem.grad(tr.x)
    return tr


def _damped_relaxation(tr: Trial, L: float) -> bool:
    # subgradient of F at T: grad f(T) + L (y - T) - grad f(y)
    phi = tr.extra["gx"] - tr.gy + L * (tr.y - tr.x)
    lhs = float(np.dot(phi, tr.y - tr.x))
    rhs = float(np.dot(phi, phi)) / L
    return lhs >= rhs - descent_tolerance(tr.fy)


def amgs_iteration(problem: CompositeProblem, params: LineSearchParams, state: AmgsState,
                   condition: str = "descent"):
    """One AMGS iteration.

    ``condition`` selects the acceptance test: ``"descent"`` uses
    ``params.criterion`` like ACGM does, ``"damped_relaxation"`` uses the
    subgradient test of the original method.
    """
    if condition not in AMGS_CONDITIONS:
        raise ValueError(f"unknown AMGS condition {condition!r}")
    prob = _amgs_problem(problem, state.x0)
    damped = condition == "damped_relaxation"
    accepts = _damped_relaxation if damped else _acceptor(prob, params.criterion)
    out = backtracking_search(params, state.L,
                              lambda L: _amgs_trial(prob, state, L, damped), accepts)
    tr = out.trial
    gx = tr.extra["gx"] if damped else prob.grad(tr.x)
    a = tr.extra["a"]
    A = state.A + a
    s = state.s - a * gx
    v = prob.prox(s, A)
    return AmgsState(x=tr.x, v=v, s=s, A=A, L=tr.L, x0=state.x0, k=state.k + 1, y=tr.y), out


# ---------------------------------------------------------------------------
# FGM


def fgm_init(problem: CompositeProblem, x0: np.ndarray, L_f: float,
             gamma0: Optional[float] = None) -> FgmState:
    if gamma0 is None:
        gamma0 = max(problem.mu, L_f)
    if gamma0 < problem.mu or not gamma0 > 0:
        raise ValueError("FGM needs gamma0 >= mu and gamma0 > 0")
    x0 = np.array(x0, dtype=float, copy=True)
    return FgmState(x=x0, v=x0, A=1.0, gamma=float(gamma0), L_f=float(L_f))


def fgm_iteration(problem: CompositeProblem, L_f: float, state: FgmState):
    """Gradient step from the FGM test point; ``psi`` must be zero."""
    if problem.kind != "zero":
        raise ValueError("FGM handles smooth problems only (zero regularizer)")
    mu = problem.mu
    a = acgm_weight_a(state.gamma, state.A, mu, mu, L_f)
    gamma_next = state.gamma + a * mu
    w_x = state.A * gamma_next
    w_v = a * state.gamma
    y = (w_x * state.x + w_v * state.v) / (w_x + w_v)
    fy = float(problem.f(y))
    gy = problem.grad(y)
    x = y - gy / L_f
    v = (state.gamma * state.v + a * mu * y - a * gy) / gamma_next
    trial = Trial(L=L_f, y=y, x=x, fy=fy, gy=gy, fx=float(problem.f(x)))
    new = FgmState(x=x, v=v, A=state.A + a, gamma=gamma_next, L_f=L_f, k=state.k + 1, y=y)
    return new, SearchOutcome(L_f, trial, 0)


# ---------------------------------------------------------------------------
# Traces and the driver


@dataclass(frozen=True)
class TraceRecord:
    k: int
    wtu: int
    F: float
    L: float
    A: float
    backtracks: int


@dataclass
class Trace:
    method: str
    records: list = field(default_factory=list)
    status: str = "ok"
    error: Optional[str] = None
    xs: Optional[list] = None
    vs: Optional[list] = None
    gammas: Optional[list] = None
    ys: Optional[list] = None
    x_final: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _vertex_and_gamma(state):
    v = getattr(state, "v", None)
    g = getattr(state, "gamma", None)
    if isinstance(state, AmgsState):
        g = 1.0
    return v, g


def _init(method, problem, x0, params, L_f, gamma0):
    if method == "acgm_es":
        return acgm_es_init(x0, params.L0)
    if method == "acgm_ex":
        return acgm_ex_init(problem, x0, params.L0)
    if method == "fista":
        return fista_init(x0, params.L0)
    if method == "fista_cp":
        return acgm_ex_init(problem, x0, L_f)
    if method == "amgs":
        return amgs_init(x0, params.L0)
    if method == "fgm":
        return fgm_init(problem, x0, L_f, gamma0)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _step(method, problem, params, state, L_f, amgs_condition, update_vertex):
    if method == "acgm_es":
        return acgm_es_iteration(problem, params, state, update_vertex)
    if method == "acgm_ex":
        return acgm_ex_iteration(problem, params, state)
    if method == "fista":
        return fista_iteration(problem, params, state)
    if method == "fista_cp":
        return fista_cp_iteration(problem, L_f, state)
    if method == "amgs":
        return amgs_iteration(problem, params, state, amgs_condition)
    return fgm_iteration(problem, L_f, state)


def _forced_step(method, problem, state, L):
    if method == "acgm_es":
        tr = acgm_es_trial(problem, state, L)
        return acgm_es_commit(problem, state, tr), SearchOutcome(L, tr, 0)
    if method in ("acgm_ex", "fista_cp"):
        tr = acgm_ex_trial(problem, state, L)
        return acgm_ex_commit(problem, state, tr), SearchOutcome(L, tr, 0)
    if method == "fista":
        tr = _fista_trial(problem, state, L)
        A = fista_weight_update(state.A, state.L, L)
        return (FistaState(x=tr.x, x_prev=state.x, t=tr.extra["t"], L=L, A=A,
                           k=state.k + 1, y=tr.y), SearchOutcome(L, tr, 0))
    raise ValueError(f"method {method!r} does not support a prescribed estimate schedule")


def run(method: str, problem: CompositeProblem, x0: np.ndarray,
        params: Optional[LineSearchParams] = None, *,
        max_iterations: Optional[int] = None, max_wtu: Optional[int] = None,
        L_f: Optional[float] = None, gamma0: Optional[float] = None,
        stop_tol: Optional[float] = None, keep_iterates: bool = False,
        amgs_condition: str = "descent", L_schedule: Optional[Sequence[float]] = None,
        update_vertex: bool = True) -> Trace:
    """Run ``method`` from ``x0`` until the budget is spent.

    Parameters
    ----------
    method : str
        One of ``METHODS``.
    params : LineSearchParams, optional
        Search parameters for the adaptive methods.
    max_iterations, max_wtu : int, optional
        Budget; at least one must be given. An iteration whose cost would
        push the WTU total past ``max_wtu`` is discarded and the run stops.
    L_f : float, optional
        Lipschitz constant for FISTA-CP and FGM; defaults to
        ``problem.lf_hint``.
    stop_tol : float, optional
        Stop once ``||x_{k+1} - y_{k+1}|| <= stop_tol``.
    keep_iterates : bool
        Retain ``x_k``, ``y_k`` and, where the method has them, ``v_k`` and
        ``gamma_k``.
    L_schedule : sequence of float, optional
        Replace the search by the prescribed accepted estimates
        ``L_1, L_2, ...`` (ACGM and FISTA only).
    update_vertex : bool
        Fault-injection switch for the estimate-sequence form.

    Returns
    -------
    Trace
        One record per iteration plus the initial one. A failed search ends
        the run with ``status = "line_search_failed"``.
    """
    if max_iterations is None and max_wtu is None and L_schedule is None:
        raise ValueError("a budget is required")
    if (max_iterations is not None and max_iterations < 0) or (max_wtu is not None and max_wtu < 0):
        raise ValueError("budget must be nonnegative")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if params is None:
        params = LineSearchParams(L0=problem.lf_hint or 1.0)
    if method in ("fista_cp", "fgm"):
        L_f = L_f if L_f is not None else problem.lf_hint
        if L_f is None:
            raise ValueError(f"{method} needs a known Lipschitz constant")
    if L_schedule is not None:
        n_sched = len(L_schedule)
        max_iterations = n_sched if max_iterations is None else min(max_iterations, n_sched)

    state = _init(method, problem, x0, params, L_f, gamma0)
    ledger = metering.WtuLedger()
    trace = Trace(method=method)
    if keep_iterates:
        trace.xs, trace.ys, trace.vs, trace.gammas = [], [], [], []

    def record(st, backtracks):
        L = st.L_f if isinstance(st, FgmState) else st.L
        trace.records.append(TraceRecord(k=st.k, wtu=ledger.total_wtu, F=eval_F(problem, st.x),
                                         L=L, A=st.A, backtracks=backtracks))
        trace.x_final = st.x
        if keep_iterates:
            v, g = _vertex_and_gamma(st)
            trace.xs.append(st.x)
            trace.ys.append(st.y)
            trace.vs.append(v)
            trace.gammas.append(g)

    record(state, 0)
    while max_iterations is None or state.k < max_iterations:
        try:
            if L_schedule is not None:
                new, out = _forced_step(method, problem, state, float(L_schedule[state.k]))
            else:
                new, out = _step(method, problem, params, state, L_f, amgs_condition,
                                 update_vertex)
        except LineSearchError as exc:
            trace.status = "line_search_failed"
            trace.error = str(exc)
            break
        cost = metering.wtu_of_run(method, 1, out.backtrack_count)
        if max_wtu is not None and ledger.total_wtu + cost > max_wtu:
            break
        metering.charge(ledger, method, metering.PLAIN_ITERATION)
        if out.backtrack_count:
            metering.charge(ledger, method, metering.BACKTRACK, out.backtrack_count)
        state = new
        record(state, out.backtrack_count)
        if stop_tol is not None:
            if float(np.linalg.norm(state.x - state.y)) <= stop_tol:
                break
    return trace
