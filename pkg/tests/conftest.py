import numpy as np
import pytest

from acgm.problem import CompositeProblem, l1_regularizer, zero_regularizer


def half_norm_problem(reg=None, mu_psi=0.0):
    """``f = 1/2 ||x||^2`` with an optional catalog regularizer."""
    reg = reg or zero_regularizer()
    return CompositeProblem(
        f=lambda x: 0.5 * float(np.dot(x, x)),
        grad=lambda x: np.array(x, dtype=float),
        psi=reg.value, prox=reg.prox, mu_f=1.0, mu_psi=mu_psi, lf_hint=1.0,
        kind=reg.kind, quad_op=lambda x: x,
    )


def l1_only_problem(lam=1.0):
    """``f = 0`` with ``lam ||x||_1``."""
    reg = l1_regularizer(lam)
    return CompositeProblem(
        f=lambda x: 0.0, grad=lambda x: np.zeros_like(x),
        psi=reg.value, prox=reg.prox, kind="l1",
    )


def brute_force_prox_1d(psi, x, tau, lo=-10.0, hi=10.0, n=200001):
    """Grid minimizer of ``psi(z) + (z - x)^2 / (2 tau)`` over scalars.

    ``psi`` is applied elementwise to the whole grid.
    """
    z = np.linspace(lo, hi, n)
    return z[np.argmin(psi(z) + (z - x) ** 2 / (2 * tau))]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


@pytest.fixture
def report():
    def record(number, title, passed, detail=""):
        ACCEPTANCE_LINES[number] = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  ({detail})"
        print(ACCEPTANCE_LINES[number])
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
