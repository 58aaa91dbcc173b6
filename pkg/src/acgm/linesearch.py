"""Armijo-type backtracking over the Lipschitz estimate.

Every iteration starts from ``L_hat = r_d * L_prev`` and multiplies by ``r_u``
until the acceptance test passes. The accepted value is therefore computed as
``((r_d * L_prev) * r_u) * r_u ...``, one multiplication per rejection, in
that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .problem import CompositeProblem

__all__ = [
    "CRITERIA",
    "LineSearchParams",
    "SearchOutcome",
    "LineSearchError",
    "descent_tolerance",
    "descent_accepts",
    "quadratic_residual_accepts",
    "backtracking_search",
    "l_upper_bound",
]

CRITERIA = ("oracle_descent", "quadratic_residual")

DESCENT_RTOL = 1e-12


class LineSearchError(RuntimeError):
    """Raised when the search exceeds its backtrack budget."""

    def __init__(self, message: str, last_L: float):
        super().__init__(message)
        self.last_L = last_L


@dataclass(frozen=True)
class LineSearchParams:
    L0: float = 1.0
    r_u: float = 2.0
    r_d: float = 0.9
    max_backtracks: int = 60
    criterion: str = "oracle_descent"

    def __post_init__(self):
        if not self.L0 > 0:
            raise ValueError("L0 must be positive")
        if not self.r_u > 1:
            raise ValueError("r_u must exceed 1")
        if not 0 < self.r_d <= 1:
            # r_d == 1 is the non-decreasing search used by FISTA
            raise ValueError("r_d must lie in (0, 1]")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")


@dataclass(frozen=True)
class SearchOutcome:
    accepted_L: float
    trial: Any
    backtrack_count: int

    @property
    def accepted_point(self) -> np.ndarray:
        return self.trial.x


def descent_tolerance(fy: float) -> float:
    return DESCENT_RTOL * max(1.0, abs(fy))


def descent_accepts(problem: CompositeProblem, y: np.ndarray, x_candidate: np.ndarray,
                    L: float, fy: float | None = None, gy: np.ndarray | None = None,
                    fx: float | None = None) -> bool:
    """Oracle descent test ``f(x) <= Q_{f,L,y}(x) + tol``."""
    if fy is None:
        fy = float(problem.f(y))
    if gy is None:
        gy = problem.grad(y)
    if fx is None:
        fx = float(problem.f(x_candidate))
    d = x_candidate - y
    Q = fy + float(np.dot(gy, d)) + 0.5 * L * float(np.dot(d, d))
    return fx <= Q + descent_tolerance(fy)


def quadratic_residual_accepts(op: Optional[Callable[[np.ndarray], np.ndarray]],
                               y: np.ndarray, x_candidate: np.ndarray, L: float,
                               scale: float = 1.0) -> bool:
    """Residual form of the descent test for quadratic ``f``.

    With ``f`` having Hessian ``scale * B^T B`` the descent test is
    equivalent to ``scale * ||B (x - y)||^2 <= L ||x - y||^2``.
    """
    if op is None:
        raise TypeError("residual criterion needs a quadratic smooth part")
    d = x_candidate - y
    Bd = op(d)
    return scale * float(np.dot(Bd, Bd)) <= L * float(np.dot(d, d))


def backtracking_search(params: LineSearchParams, L_prev: float,
                        trial_builder: Callable[[float], Any],
                        accepts: Callable[[Any, float], bool],
                        r_d: float | None = None,
                        lower_limit: float = 0.0) -> SearchOutcome:
    """Find the first accepted estimate in ``r_d L_prev, r_d L_prev r_u, ...``.

    Parameters
    ----------
    params : LineSearchParams
    L_prev : float
        Estimate accepted at the previous iteration.
    trial_builder : callable
        ``L_hat -> trial``; deterministic in ``L_hat``.
    accepts : callable
        ``(trial, L_hat) -> bool``.
    r_d : float, optional
        Overrides ``params.r_d`` (FISTA passes 1).
    lower_limit : float
        Trial values at or below this are stepped over without being built
        or counted; used to keep ``L_hat > mu_f``.
    """
    rd = params.r_d if r_d is None else r_d
    L_hat = rd * L_prev
    while L_hat <= lower_limit:
        L_hat = L_hat * params.r_u
    rejections = 0
    while True:
        trial = trial_builder(L_hat)
        if accepts(trial, L_hat):
            return SearchOutcome(L_hat, trial, rejections)
        rejections += 1
        if rejections > params.max_backtracks:
            raise LineSearchError(
                f"no acceptable step after {params.max_backtracks} backtracks "
                f"(last L = {L_hat:.6g})", L_hat)
        L_hat = L_hat * params.r_u


def l_upper_bound(L_f: float, L0: float, r_u: float, r_d: float) -> float:
    """Ceiling ``max(r_u L_f, r_d L0)`` on every accepted estimate."""
    if min(L_f, L0, r_u, r_d) <= 0 or not r_u > 1:
        raise ValueError("need positive arguments and r_u > 1")
    return max(r_u * L_f, r_d * L0)

