"""Convergence guarantees and trace certification.

The guarantee of an accelerated method is its weight sequence ``A_k``: for
every minimizer ``x*``,

    A_k (F(x_k) - F*) <= A_0 (F(x_0) - F*) + gamma_0/2 ||x_0 - x*||^2,

which for ACGM (``A_0 = 0``, ``gamma_0 = 1``) reads
``A_k (F(x_k) - F*) <= 1/2 ||x_0 - x*||^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .solvers import Trace, fista_weight_update

__all__ = [
    "GuaranteeParams",
    "RateConstants",
    "acgm_guarantee_floor",
    "per_wtu_rate_constants",
    "certify_guarantee",
    "gap_sequence",
    "diagonal_l1_minimizer",
    "acgm_weights_for_schedule",
    "fista_weights_for_schedule",
    "CERT_ATOL",
    "CERT_RTOL",
]

CERT_ATOL = 1e-8
CERT_RTOL = 1e-9


@dataclass(frozen=True)
class GuaranteeParams:
    """Worst-case line-search outcome: ceiling ``L_u`` and convexity split."""

    L_u: float
    mu_f: float = 0.0
    mu_psi: float = 0.0

    def __post_init__(self):
        if not self.L_u > 0 or self.mu_f < 0 or self.mu_psi < 0:
            raise ValueError("need L_u > 0 and nonnegative mu_f, mu_psi")

    @property
    def mu(self) -> float:
        return self.mu_f + self.mu_psi

    @property
    def q_u(self) -> float:
        return self.mu / (self.L_u + self.mu_psi)


@dataclass(frozen=True)
class RateConstants:
    B_amgs: float
    C_amgs: float
    B_fgm: float
    C_fgm: float

    @property
    def base_ratio(self) -> float:
        """``sqrt(B_amgs / B_fgm)``; below one means FGM is faster per WTU."""
        return math.sqrt(self.B_amgs / self.B_fgm)


def acgm_guarantee_floor(k: int, params: GuaranteeParams) -> float:
    """Smallest ``A_k`` ACGM can produce when every estimate stays below ``L_u``."""
    if k < 1:
        raise ValueError("the guarantee starts at k = 1")
    q = params.q_u
    if q >= 1.0:
        raise ValueError("q_u must be below 1")
    if params.mu == 0.0:
        return (k + 1) ** 2 / (4.0 * params.L_u)
    return (1.0 - math.sqrt(q)) ** (-(k - 1)) / (params.L_u - params.mu_f)


def per_wtu_rate_constants(q: float, L_f: float) -> RateConstants:
    """Per-WTU growth bases and constants of the AMGS and FGM guarantees."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if not L_f > 0:
        raise ValueError("L_f must be positive")
    B_amgs = (1.0 + math.sqrt(q / (2.0 * (1.0 - q)))) ** 2
    C_amgs = 1.0 / (L_f * (math.sqrt(1.0 - q) + math.sqrt(q / 2.0)) ** 2)
    B_fgm = (1.0 / (1.0 - math.sqrt(q))) ** 2
    C_fgm = 1.0 / (2.0 * L_f)
    return RateConstants(B_amgs, C_amgs, B_fgm, C_fgm)


def _initial_term(trace: Trace, F_star: float) -> float:
    r0 = trace.records[0]
    if r0.A == 0.0:
        return 0.0
    return r0.A * (r0.F - F_star)


def certify_guarantee(trace: Trace, x_star: np.ndarray, F_star: float, x0: np.ndarray,
                      gamma0: float = 1.0, atol: float = CERT_ATOL,
                      rtol: float = CERT_RTOL) -> np.ndarray:
    """Check ``A_k (F(x_k) - F*) <= A_0 (F(x_0) - F*) + gamma0/2 ||x0 - x*||^2``.

    Returns one boolean per record with ``k >= 1``. The slack is
    ``atol + rtol * (|lhs| + |rhs|)``.
    """
    d = np.asarray(x0) - np.asarray(x_star)
    rhs = _initial_term(trace, F_star) + 0.5 * gamma0 * float(np.dot(d, d))
    ok = []
    for r in trace.records[1:]:
        lhs = r.A * (r.F - F_star)
        ok.append(lhs <= rhs + atol + rtol * (abs(lhs) + abs(rhs)))
    return np.array(ok, dtype=bool)


def gap_sequence(trace: Trace, x_star: np.ndarray, F_star: float) -> np.ndarray:
    """``A_k (F(x_k) - F*) + gamma_k/2 ||v_k - x*||^2`` along a trace with vertices."""
    if trace.vs is None or trace.gammas is None or any(v is None for v in trace.vs):
        raise ValueError("trace does not carry estimate vertices; run with keep_iterates")
    gaps = []
    for r, v, g in zip(trace.records, trace.vs, trace.gammas):
        d = v - x_star
        # A_0 = 0 removes a possibly infinite F(x_0)
        head = 0.0 if r.A == 0.0 else r.A * (r.F - F_star)
        gaps.append(head + 0.5 * g * float(np.dot(d, d)))
    return np.array(gaps)


def diagonal_l1_minimizer(d: np.ndarray, c: np.ndarray, lam: float):
    """Closed-form minimizer of ``1/2 sum d_i (x_i - c_i)^2 + lam ||x||_1``.

    Each coordinate is the soft threshold of ``c_i`` at ``lam / d_i``; zero
    curvature leaves only ``lam |x_i|``, minimized at 0. Returns
    ``(x_star, F_star)``.
    """
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    x = np.zeros_like(c)
    pos = d > 0
    thr = lam / d[pos]
    x[pos] = np.sign(c[pos]) * np.maximum(np.abs(c[pos]) - thr, 0.0)
    if lam == 0.0 and np.any(~pos):
        x[~pos] = c[~pos]
    r = x - c
    F = 0.5 * float(np.sum(d * r * r)) + lam * float(np.abs(x).sum())
    return x, F


def acgm_weights_for_schedule(L_seq: Sequence[float]) -> np.ndarray:
    """Weights of non-strongly convex ACGM along accepted estimates ``L_1, L_2, ...``.

    Uses the closed form ``A_{k+1} = (sqrt(1/(4L)) + sqrt(1/(4L) + A_k))^2``.
    Returns ``A_0, ..., A_K``.
    """
    A = [0.0]
    for L in L_seq:
        h = 1.0 / (4.0 * L)
        A.append((math.sqrt(h) + math.sqrt(h + A[-1])) ** 2)
    return np.array(A)


def fista_weights_for_schedule(L_seq: Sequence[float], L0: float | None = None) -> np.ndarray:
    """FISTA's surrogate weights along the same estimates; ``A_0 = 0``."""
    A = [0.0]
    L_prev = L_seq[0] if L0 is None else L0
    for L in L_seq:
        A.append(fista_weight_update(A[-1], L_prev, L))
        L_prev = L
    return np.array(A)
