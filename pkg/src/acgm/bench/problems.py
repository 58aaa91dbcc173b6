"""Benchmark problem instances.

Two imaging problems (wavelet-sparse deblurring and dual Huber-ROF denoising)
plus two small synthetic ones used by the command line and the verification
suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..analysis import diagonal_l1_minimizer
from ..problem import (
    CompositeProblem,
    diagonal_quadratic_l1,
    huber_rof_dual_regularizer,
    l1_regularizer,
    least_squares_l1,
)
from ..solvers import run
from .images import SplitMix64, add_gaussian_noise, synth_test_image
from .operators import (
    compose,
    discrete_gradient_operator,
    estimate_operator_norm_sq,
    gaussian_blur_operator,
    haar_analysis,
    haar_operator,
)

__all__ = [
    "Instance",
    "build_deblurring_problem",
    "deblurring_start",
    "build_huber_rof_dual_problem",
    "huber_rof_start",
    "huber_rof_primal",
    "deblur_instance",
    "huber_rof_instance",
    "lasso_synthetic",
    "quadratic_l1_known",
    "reference_optimum",
    "DEBLUR_LAMBDA",
    "DEBLUR_NOISE_STD",
    "HUBER_LAMBDA",
    "HUBER_EPS",
    "HUBER_NOISE_STD",
]

DEBLUR_LAMBDA = 2e-5
DEBLUR_NOISE_STD = 1e-3
HUBER_LAMBDA = 0.1
HUBER_EPS = 1e-3
HUBER_NOISE_STD = 0.1


@dataclass(frozen=True)
class Instance:
    """A problem with its starting point and, when known, the optimum."""

    problem: CompositeProblem
    x0: np.ndarray
    data: Optional[np.ndarray] = None
    x_star: Optional[np.ndarray] = None
    F_star: Optional[float] = None


def _check_image(b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 2:
        raise ValueError("expected a 2-D image")
    if not np.all(np.isfinite(b)):
        raise ValueError("image has non-finite pixels")
    return b


def _residual_cache(residual):
    """Memoize ``residual(x)`` for the most recent ``x`` object.

    Solvers evaluate ``f`` and ``grad`` at the same array; keying on object
    identity (with the array kept alive) saves one operator application.
    Arrays are never modified in place by the solvers.
    """
    last = [None, None]

    def get(x):
        if last[0] is not x:
            last[0], last[1] = x, residual(x)
        return last[1]

    return get


def build_deblurring_problem(b: np.ndarray, lam: float, sigma: float = 4.0,
                             kernel: int = 9, stages: int = 3,
                             norm_tol: float = 1e-6, seed: int = 0) -> CompositeProblem:
    """``||R W x - b||^2 + lam ||x||_1`` with ``R`` a Gaussian blur and ``W``
    the Haar synthesis; the unknown ``x`` holds wavelet coefficients."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    b = _check_image(b)
    n1, n2 = b.shape
    A = compose(gaussian_blur_operator(n1, n2, sigma, kernel), haar_operator(n1, n2, stages))
    bv = b.ravel()
    reg = l1_regularizer(lam)

    res = _residual_cache(lambda x: A.forward(x) - bv)

    def f(x):
        r = res(x)
        return float(np.dot(r, r))

    def grad(x):
        return 2.0 * A.adjoint(res(x))

    norm_sq = estimate_operator_norm_sq(A, tol=norm_tol, seed=seed).value
    return CompositeProblem(f=f, grad=grad, psi=reg.value, prox=reg.prox,
                            lf_hint=2.0 * norm_sq, kind="l1",
                            quad_op=A.forward, quad_scale=2.0)


def deblurring_start(b: np.ndarray, stages: int = 3) -> np.ndarray:
    """Wavelet coefficients of the observed image."""
    return haar_analysis(_check_image(b), stages).ravel()


def build_huber_rof_dual_problem(b: np.ndarray, lam: float = HUBER_LAMBDA,
                                 eps: float = HUBER_EPS, norm_tol: float = 1e-6,
                                 seed: int = 0) -> CompositeProblem:
    """``1/2 ||D* p - b||^2`` plus the ball-constrained quadratic on ``p``.

    The dual field ``p`` is flattened from shape ``(n1, n2, 2)``.
    """
    if not lam > 0 or eps < 0:
        raise ValueError("need lambda > 0 and eps >= 0")
    b = _check_image(b)
    n1, n2 = b.shape
    D = discrete_gradient_operator(n1, n2)
    bv = b.ravel()
    reg = huber_rof_dual_regularizer(lam, eps)

    res = _residual_cache(lambda p: D.adjoint(p) - bv)

    def f(p):
        r = res(p)
        return 0.5 * float(np.dot(r, r))

    def grad(p):
        return D.forward(res(p))

    # ||D*||^2 = ||D||^2
    norm_sq = estimate_operator_norm_sq(D, tol=norm_tol, seed=seed).value
    return CompositeProblem(f=f, grad=grad, psi=reg.value, prox=reg.prox,
                            mu_psi=reg.mu, lf_hint=norm_sq, kind="huber_rof_dual",
                            quad_op=D.adjoint, quad_scale=1.0)


def huber_rof_start(b: np.ndarray) -> np.ndarray:
    b = _check_image(b)
    return discrete_gradient_operator(*b.shape).forward(b.ravel())


def huber_rof_primal(p: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Denoised image ``b - D* p`` recovered from a dual field."""
    b = _check_image(b)
    return b - discrete_gradient_operator(*b.shape).adjoint(p).reshape(b.shape)


def deblur_instance(n: int = 256, seed: int = 0, lam: float = DEBLUR_LAMBDA,
                    noise_std: float = DEBLUR_NOISE_STD,
                    image: Optional[np.ndarray] = None) -> Instance:
    """Blur and noise a test image (synthetic unless ``image`` is given)."""
    clean = synth_test_image(n, n, seed) if image is None else _check_image(image)
    n1, n2 = clean.shape
    blurred = gaussian_blur_operator(n1, n2).forward(clean.ravel()).reshape(n1, n2)
    b = add_gaussian_noise(blurred, noise_std, seed)
    return Instance(build_deblurring_problem(b, lam), deblurring_start(b), data=b)


def huber_rof_instance(n: int = 256, seed: int = 0, lam: float = HUBER_LAMBDA,
                       eps: float = HUBER_EPS, noise_std: float = HUBER_NOISE_STD,
                       image: Optional[np.ndarray] = None) -> Instance:
    clean = synth_test_image(n, n, seed) if image is None else _check_image(image)
    b = add_gaussian_noise(clean, noise_std, seed)
    return Instance(build_huber_rof_dual_problem(b, lam, eps), huber_rof_start(b), data=b)


def lasso_synthetic(m: int = 60, n: int = 100, seed: int = 0, lam: Optional[float] = None,
                    sparsity: int = 10) -> Instance:
    """Gaussian design, sparse ground truth, small noise.

    ``lam`` defaults to a tenth of ``||M^T b||_inf``.
    """
    rng = SplitMix64(seed)
    M = rng.normal(m * n).reshape(m, n) / np.sqrt(m)
    x_true = np.zeros(n)
    support = np.argsort(rng.uniform(n))[:min(sparsity, n)]
    x_true[support] = rng.normal(support.size)
    b = M @ x_true + 0.01 * rng.normal(m)
    if lam is None:
        lam = 0.1 * float(np.max(np.abs(M.T @ b)))
    return Instance(least_squares_l1(M, b, lam), np.zeros(n), data=b)


def quadratic_l1_known(n: int = 20, seed: int = 0, mu: float = 0.0, L: float = 10.0,
                       lam: float = 0.5) -> Instance:
    """Separable quadratic plus L1 with a closed-form optimum.

    Curvatures span ``[mu, L]`` with both ends attained, so ``mu_f = mu`` and
    ``L_f = L`` exactly.
    """
    if n < 2 or not 0 <= mu < L:
        raise ValueError("need n >= 2 and 0 <= mu < L")
    rng = SplitMix64(seed)
    d = mu + (L - mu) * rng.uniform(n)
    d[0], d[1] = mu, L
    c = 2.0 * rng.normal(n)
    x0 = rng.normal(n)
    x_star, F_star = diagonal_l1_minimizer(d, c, lam)
    return Instance(diagonal_quadratic_l1(d, c, lam), x0, data=c, x_star=x_star,
                    F_star=F_star)


def reference_optimum(problem: CompositeProblem, x0: np.ndarray, iterations: int,
                      L_f: Optional[float] = None, stop_tol: float = 0.0):
    """Approximate ``(x*, F*)`` by a long fixed-step run with a known ``L_f``.

    Returns the last iterate and the lowest objective seen.
    """
    trace = run("fista_cp", problem, x0, max_iterations=iterations, L_f=L_f,
                stop_tol=stop_tol or None)
    return trace.x_final, float(trace.column("F").min())
