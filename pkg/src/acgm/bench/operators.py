"""Linear operators of the imaging benchmarks.

Operators act on flat vectors; the grid shapes are recorded on the operator.
Adjoints are implemented directly: the blur as the transpose of its
per-axis matrices, the wavelets and differences in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .images import SplitMix64

__all__ = [
    "LinearOperator",
    "compose",
    "gaussian_kernel_1d",
    "gaussian_blur_operator",
    "haar_operator",
    "haar_analysis",
    "haar_synthesis",
    "blur_matrix_1d",
    "discrete_gradient_operator",
    "NormEstimate",
    "estimate_operator_norm_sq",
]


@dataclass(frozen=True)
class LinearOperator:
    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    in_shape: tuple
    out_shape: tuple

    @property
    def in_size(self) -> int:
        return int(np.prod(self.in_shape))

    @property
    def out_size(self) -> int:
        return int(np.prod(self.out_shape))

    def __call__(self, x):
        return self.forward(x)


def compose(outer: LinearOperator, inner: LinearOperator) -> LinearOperator:
    """``outer o inner``."""
    if outer.in_size != inner.out_size:
        raise ValueError("operator dimensions do not chain")
    return LinearOperator(lambda x: outer.forward(inner.forward(x)),
                          lambda y: inner.adjoint(outer.adjoint(y)),
                          inner.in_shape, outer.out_shape)


# ---------------------------------------------------------------------------
# Gaussian blur with reflexive boundary


def gaussian_kernel_1d(sigma: float = 4.0, size: int = 9) -> np.ndarray:
    """Sampled Gaussian on integer offsets, normalized to sum 1.

    The 2-D kernel is the outer product of this with itself, so it also sums
    to one.
    """
    if size % 2 != 1:
        raise ValueError("kernel size must be odd")
    h = size // 2
    k = np.exp(-np.arange(-h, h + 1, dtype=float) ** 2 / (2.0 * sigma * sigma))
    return k / k.sum()


def blur_matrix_1d(n: int, k: np.ndarray) -> np.ndarray:
    """1-D blur with half-sample mirror boundary as an ``n x n`` matrix.

    Taps falling outside ``0..n-1`` are folded back onto the pixel they
    mirror, so rows still sum to one.
    """
    h = k.size // 2
    if n < h + 1:
        raise ValueError("signal shorter than the kernel half-width")
    B = np.zeros((n, n))
    rows = np.arange(n)
    for j, w in enumerate(k):
        s = rows + j - h
        s = np.where(s < 0, -s - 1, s)
        s = np.where(s >= n, 2 * n - 1 - s, s)
        np.add.at(B, (rows, s), w)
    return B


def gaussian_blur_operator(n1: int, n2: int, sigma: float = 4.0, size: int = 9) -> LinearOperator:
    """Separable Gaussian blur with mirror (half-sample symmetric) boundary.

    Applied as ``B1 U B2^T``; the adjoint is ``B1^T V B2``.
    """
    if min(n1, n2) < size:
        raise ValueError("image must be at least as large as the kernel")
    k = gaussian_kernel_1d(sigma, size)
    B1, B2 = blur_matrix_1d(n1, k), blur_matrix_1d(n2, k)
    shape = (n1, n2)

    def fwd(x):
        return (B1 @ np.reshape(x, shape) @ B2.T).ravel()

    def adj(y):
        return (B1.T @ np.reshape(y, shape) @ B2).ravel()

    return LinearOperator(fwd, adj, shape, shape)


# ---------------------------------------------------------------------------
# Orthonormal Haar wavelets


_S = 1.0 / math.sqrt(2.0)


def _analysis_stage(block: np.ndarray) -> np.ndarray:
    """One 2-D Haar stage: sums/differences of row pairs, then column pairs."""
    m1, m2 = block.shape
    r = block.reshape(m1 // 2, 2, m2)
    t = np.concatenate([r[:, 0] + r[:, 1], r[:, 0] - r[:, 1]]) * _S
    c = t.reshape(m1, m2 // 2, 2)
    return np.concatenate([c[:, :, 0] + c[:, :, 1], c[:, :, 0] - c[:, :, 1]], axis=1) * _S


def _synthesis_stage(block: np.ndarray) -> np.ndarray:
    m1, m2 = block.shape
    a, d = block[:, :m2 // 2], block[:, m2 // 2:]
    t = np.empty((m1, m2))
    t[:, 0::2] = (a + d) * _S
    t[:, 1::2] = (a - d) * _S
    a, d = t[:m1 // 2], t[m1 // 2:]
    u = np.empty((m1, m2))
    u[0::2] = (a + d) * _S
    u[1::2] = (a - d) * _S
    return u


def haar_analysis(img: np.ndarray, stages: int = 3) -> np.ndarray:
    """Coefficients in the usual nested layout (coarse block top-left)."""
    c = np.array(img, dtype=float, copy=True)
    m1, m2 = c.shape
    for _ in range(stages):
        c[:m1, :m2] = _analysis_stage(c[:m1, :m2])
        m1 //= 2
        m2 //= 2
    return c


def haar_synthesis(coef: np.ndarray, stages: int = 3) -> np.ndarray:
    u = np.array(coef, dtype=float, copy=True)
    n1, n2 = u.shape
    for s in reversed(range(stages)):
        m1, m2 = n1 >> s, n2 >> s
        u[:m1, :m2] = _synthesis_stage(u[:m1, :m2])
    return u


def haar_operator(n1: int, n2: int, stages: int = 3) -> LinearOperator:
    """Synthesis ``W`` (coefficients to image); its adjoint is the analysis."""
    step = 2 ** stages
    if n1 % step or n2 % step:
        raise ValueError(f"image dimensions must be divisible by {step}")
    shape = (n1, n2)
    return LinearOperator(
        lambda c: haar_synthesis(np.reshape(c, shape), stages).ravel(),
        lambda u: haar_analysis(np.reshape(u, shape), stages).ravel(),
        shape, shape)


# ---------------------------------------------------------------------------
# Forward-difference gradient


def discrete_gradient_operator(n1: int, n2: int) -> LinearOperator:
    """Forward differences with a zero difference past the last row/column.

    Output is a field of shape ``(n1, n2, 2)``; the adjoint is the negative
    divergence.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("empty image")
    shape = (n1, n2)

    def fwd(x):
        u = np.reshape(x, shape)
        g = np.zeros((n1, n2, 2))
        g[:-1, :, 0] = u[1:] - u[:-1]
        g[:, :-1, 1] = u[:, 1:] - u[:, :-1]
        return g.ravel()

    def adj(y):
        p = np.reshape(y, (n1, n2, 2))
        out = np.zeros(shape)
        out[:-1] -= p[:-1, :, 0]
        out[1:] += p[:-1, :, 0]
        out[:, :-1] -= p[:, :-1, 1]
        out[:, 1:] += p[:, :-1, 1]
        return out.ravel()

    return LinearOperator(fwd, adj, shape, (n1, n2, 2))


# ---------------------------------------------------------------------------
# Power iteration


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool

    def __float__(self):
        return self.value


def estimate_operator_norm_sq(op: LinearOperator, tol: float = 1e-6, max_iters: int = 2000,
                              seed: int = 0, x0: Optional[np.ndarray] = None) -> NormEstimate:
    """Largest eigenvalue of ``op* op`` by power iteration.

    Stops when the Rayleigh quotient changes by at most ``tol`` relative.
    """
    x = SplitMix64(seed).normal(op.in_size) if x0 is None else np.array(x0, dtype=float)
    x /= np.linalg.norm(x)
    prev = 0.0
    for it in range(1, max_iters + 1):
        y = op.adjoint(op.forward(x))
        lam = float(np.dot(x, y))
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return NormEstimate(0.0, it, True)
        if abs(lam - prev) <= tol * abs(lam):
            return NormEstimate(lam, it, True)
        prev = lam
        x = y / ny
    return NormEstimate(prev, max_iters, False)
