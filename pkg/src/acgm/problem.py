"""Composite objective black-box and a small catalog of proximal maps.

A problem is the bundle of oracles ``f``, ``grad``, ``psi`` and ``prox`` for
the objective ``F(x) = f(x) + psi(x)``, together with the strong convexity
parameters of both parts. Vectors are flat float64 numpy arrays; imaging
problems flatten their grids.

``psi`` may return ``math.inf`` outside its domain. Infinite values are only
ever compared against, never used in arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "INF",
    "CompositeProblem",
    "eval_F",
    "upper_model_Q",
    "prox_grad_step",
    "composite_gradient",
    "relaxed_lower_bound",
    "transfer_convexity",
    "prox_l1",
    "prox_huber_rof_dual",
    "huber_rof_dual_value",
    "zero_regularizer",
    "l1_regularizer",
    "huber_rof_dual_regularizer",
    "Regularizer",
    "diagonal_quadratic_l1",
    "least_squares_l1",
]

INF = math.inf

# Relative slack on the per-pixel ball constraint of the dual Huber-ROF term.
BALL_FEASIBILITY_RTOL = 1e-12


@dataclass(frozen=True)
class CompositeProblem:
    """Oracle bundle for ``F = f + psi``.

    Parameters
    ----------
    f : callable
        Smooth part, ``x -> float``.
    grad : callable
        Gradient of ``f``, ``x -> array``.
    psi : callable
        Regularizer value, ``x -> float``; ``INF`` outside the feasible set.
    prox : callable
        ``(x, tau) -> argmin_z psi(z) + ||z - x||^2 / (2 tau)``.
    mu_f, mu_psi : float
        Strong convexity parameters of ``f`` and ``psi``.
    lf_hint : float, optional
        Known Lipschitz constant of ``grad``.
    kind : str
        Catalog name of the regularizer (``"zero"``, ``"l1"``,
        ``"huber_rof_dual"``) or ``"custom"``.
    quad_op, quad_scale : optional
        When ``f`` is quadratic with Hessian ``quad_scale * B^T B``, ``quad_op``
        applies ``B``. Enables the residual-based line-search test.
    """

    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    mu_f: float = 0.0
    mu_psi: float = 0.0
    lf_hint: Optional[float] = None
    kind: str = "custom"
    quad_op: Optional[Callable[[np.ndarray], np.ndarray]] = None
    quad_scale: float = 1.0

    def __post_init__(self):
        if self.mu_f < 0 or self.mu_psi < 0:
            raise ValueError("strong convexity parameters must be nonnegative")
        if self.lf_hint is not None and not self.lf_hint > 0:
            raise ValueError("lf_hint must be positive")

    @property
    def mu(self) -> float:
        return self.mu_f + self.mu_psi

    def F(self, x: np.ndarray) -> float:
        return eval_F(self, x)


def eval_F(problem: CompositeProblem, x: np.ndarray) -> float:
    """Objective value ``f(x) + psi(x)``; ``INF`` iff ``psi(x)`` is infinite."""
    fx = float(problem.f(x))
    if not math.isfinite(fx):
        raise FloatingPointError(f"smooth oracle returned non-finite value {fx}")
    px = float(problem.psi(x))
    if math.isinf(px):
        return INF
    return fx + px


def upper_model_Q(problem: CompositeProblem, y: np.ndarray, L: float,
                  x: np.ndarray, fy: float | None = None,
                  gy: np.ndarray | None = None) -> float:
    """Quadratic upper model ``f(y) + <grad f(y), x - y> + L/2 ||x - y||^2``.

    ``fy`` and ``gy`` may be passed when already known at ``y``.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if fy is None:
        fy = float(problem.f(y))
    if gy is None:
        gy = problem.grad(y)
    d = x - y
    return fy + float(np.dot(gy, d)) + 0.5 * L * float(np.dot(d, d))


def prox_grad_step(problem: CompositeProblem, y: np.ndarray, L: float,
                   gy: np.ndarray | None = None) -> np.ndarray:
    """Proximal gradient step ``prox_{psi/L}(y - grad f(y) / L)``."""
    if not L > 0:
        raise ValueError("L must be positive")
    if gy is None:
        gy = problem.grad(y)
    return problem.prox(y - gy / L, 1.0 / L)


def composite_gradient(problem: CompositeProblem, y: np.ndarray, L: float) -> np.ndarray:
    """Composite gradient ``L * (y - T_L(y))``."""
    return L * (y - prox_grad_step(problem, y, L))


def relaxed_lower_bound(problem: CompositeProblem, y: np.ndarray, x_next: np.ndarray,
                        L: float, x: np.ndarray) -> float:
    """Relaxed supporting parabola of ``F`` at ``y``, evaluated at ``x``.

    ``x_next`` must be the proximal gradient step from ``y`` taken with
    inverse step ``L`` (the effective one, ``L + mu_psi``, in the transferred
    form is formed here). The bound is valid whenever the descent test
    accepted ``L``.
    """
    L_eff = L + problem.mu_psi
    g = L_eff * (y - x_next)
    F_next = eval_F(problem, x_next)
    dx = x - y
    return (F_next + float(np.dot(g, g)) / (2.0 * L_eff) + float(np.dot(g, dx))
            + 0.5 * problem.mu * float(np.dot(dx, dx)))


def transfer_convexity(problem: CompositeProblem, amount: float,
                       center: np.ndarray) -> CompositeProblem:
    """Move ``amount`` of strong convexity from ``psi`` into ``f``.

    Returns the problem with ``f' = f + amount/2 ||x - center||^2`` and
    ``psi' = psi - amount/2 ||x - center||^2``; the objective is unchanged.
    A negative ``amount`` moves curvature from ``f`` into ``psi``.
    """
    m = float(amount)
    if m > problem.mu_psi or -m > problem.mu_f:
        raise ValueError("cannot transfer more curvature than is available")
    c = np.array(center, dtype=float, copy=True)
    f0, g0, psi0, prox0 = problem.f, problem.grad, problem.psi, problem.prox

    def f(x):
        d = x - c
        return f0(x) + 0.5 * m * float(np.dot(d, d))

    def grad(x):
        return g0(x) + m * (x - c)

    def psi(x):
        v = psi0(x)
        if math.isinf(v):
            return INF
        d = x - c
        return v - 0.5 * m * float(np.dot(d, d))

    def prox(x, tau):
        # argmin psi(z) - m/2 ||z - c||^2 + ||z - x||^2 / (2 tau)
        rho = 1.0 / tau - m
        if not rho > 0:
            raise ValueError("prox step too long for the transferred regularizer")
        return prox0((x / tau - m * c) / rho, 1.0 / rho)

    lf = None if problem.lf_hint is None else problem.lf_hint + m
    return replace(problem, f=f, grad=grad, psi=psi, prox=prox,
                   mu_f=problem.mu_f + m, mu_psi=problem.mu_psi - m,
                   lf_hint=lf, kind="custom", quad_op=None)


# ---------------------------------------------------------------------------
# Proximal catalog


def prox_l1(x: np.ndarray, threshold: float) -> np.ndarray:
    """Soft thresholding, ``sign(x) * max(|x| - threshold, 0)``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def prox_huber_rof_dual(p: np.ndarray, tau: float, lam: float, eps: float) -> np.ndarray:
    """Prox of ``eps/(2 lam) ||p||^2`` restricted to per-pixel balls ``||p_ij||^2 <= lam``.

    ``p`` holds one 2-vector per pixel, either flat (pixel-major) or with a
    trailing axis of length 2. The objective is isotropic around the shrunk
    point, so shrinking then projecting gives the exact minimizer.
    """
    if not (tau > 0 and lam > 0) or eps < 0:
        raise ValueError("need tau > 0, lam > 0, eps >= 0")
    shape = p.shape
    z = np.reshape(p, (-1, 2)) / (1.0 + tau * eps / lam)
    sq = np.einsum("ij,ij->i", z, z)
    out = sq > lam
    if np.any(out):
        z = z.copy()
        z[out] *= (math.sqrt(lam) / np.sqrt(sq[out]))[:, None]
    return z.reshape(shape)


def huber_rof_dual_value(p: np.ndarray, lam: float, eps: float) -> float:
    z = np.reshape(p, (-1, 2))
    sq = np.einsum("ij,ij->i", z, z)
    if np.any(sq > lam * (1.0 + BALL_FEASIBILITY_RTOL)):
        return INF
    return eps / (2.0 * lam) * float(sq.sum())


@dataclass(frozen=True)
class Regularizer:
    """A catalog entry: value oracle, prox oracle and its strong convexity."""

    kind: str
    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    mu: float = 0.0


def zero_regularizer() -> Regularizer:
    return Regularizer("zero", lambda x: 0.0, lambda x, tau: np.array(x, dtype=float, copy=True))


def l1_regularizer(lam: float) -> Regularizer:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return Regularizer(
        "l1",
        lambda x: lam * float(np.abs(x).sum()),
        lambda x, tau: prox_l1(x, tau * lam),
    )


def huber_rof_dual_regularizer(lam: float, eps: float) -> Regularizer:
    if not lam > 0 or eps < 0:
        raise ValueError("need lambda > 0 and eps >= 0")
    return Regularizer(
        "huber_rof_dual",
        lambda p: huber_rof_dual_value(p, lam, eps),
        lambda p, tau: prox_huber_rof_dual(p, tau, lam, eps),
        mu=eps / lam,
    )


# ---------------------------------------------------------------------------
# Small problems


def diagonal_quadratic_l1(d: np.ndarray, c: np.ndarray, lam: float) -> CompositeProblem:
    """``f(x) = 1/2 sum d_i (x_i - c_i)^2`` with ``psi = lam ||x||_1`` (or zero if ``lam == 0``).

    The curvature extremes give ``mu_f = min(d)`` and ``lf_hint = max(d)``.
    """
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(d < 0) or not np.max(d) > 0:
        raise ValueError("curvatures must be nonnegative and not all zero")
    reg = l1_regularizer(lam) if lam > 0 else zero_regularizer()

    def f(x):
        r = x - c
        return 0.5 * float(np.dot(d * r, r))

    def grad(x):
        return d * (x - c)

    sqrt_d = np.sqrt(d)
    return CompositeProblem(
        f=f, grad=grad, psi=reg.value, prox=reg.prox,
        mu_f=float(d.min()), mu_psi=reg.mu, lf_hint=float(d.max()),
        kind=reg.kind, quad_op=lambda x: sqrt_d * x, quad_scale=1.0,
    )


def least_squares_l1(M: np.ndarray, b: np.ndarray, lam: float,
                     ridge: float = 0.0) -> CompositeProblem:
    """Lasso ``1/2 ||M x - b||^2 + lam ||x||_1``, optionally plus ``ridge/2 ||x||^2`` in ``f``."""
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    reg = l1_regularizer(lam) if lam > 0 else zero_regularizer()
    sv = np.linalg.svd(M, compute_uv=False)
    smax2 = float(sv[0] ** 2)
    smin2 = float(sv[-1] ** 2) if M.shape[0] >= M.shape[1] else 0.0

    def f(x):
        r = M @ x - b
        return 0.5 * float(np.dot(r, r)) + 0.5 * ridge * float(np.dot(x, x))

    def grad(x):
        return M.T @ (M @ x - b) + ridge * x

    quad_op = None
    if ridge == 0.0:
        quad_op = lambda x: M @ x  # noqa: E731
    return CompositeProblem(
        f=f, grad=grad, psi=reg.value, prox=reg.prox,
        mu_f=smin2 + ridge, mu_psi=reg.mu, lf_hint=smax2 + ridge,
        kind=reg.kind, quad_op=quad_op,
    )
