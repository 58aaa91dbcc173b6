import copy
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acgm.analysis import (
    GuaranteeParams,
    acgm_guarantee_floor,
    acgm_weights_for_schedule,
    per_wtu_rate_constants,
    certify_guarantee,
    diagonal_l1_minimizer,
    fista_weights_for_schedule,
    gap_sequence,
)
from acgm.bench.problems import quadratic_l1_known
from acgm.linesearch import LineSearchParams
from acgm.solvers import run

from conftest import brute_force_prox_1d

RESIDUAL = LineSearchParams(L0=3.0, r_u=2.0, r_d=0.9, criterion="quadratic_residual")
Q_GRID = [0.01] + [round(0.05 * i, 2) for i in range(1, 20)]


def test_floor_examples():
    assert acgm_guarantee_floor(1, GuaranteeParams(2.5)) == pytest.approx(1 / 2.5)
    assert acgm_guarantee_floor(3, GuaranteeParams(2.0)) == pytest.approx(2.0)
    gp = GuaranteeParams(4.0, mu_f=0.5, mu_psi=0.25)
    assert acgm_guarantee_floor(1, gp) == pytest.approx(1 / 3.5)
    ratio = acgm_guarantee_floor(6, gp) / acgm_guarantee_floor(5, gp)
    assert ratio == pytest.approx(1 / (1 - math.sqrt(0.75 / 4.25)))
    with pytest.raises(ValueError):
        acgm_guarantee_floor(0, gp)


def test_q_u_definition():
    gp = GuaranteeParams(3.0, mu_f=0.2, mu_psi=0.1)
    assert gp.q_u == pytest.approx(0.3 / 3.1)


def test_rate_constants_spot_values():
    rc = per_wtu_rate_constants(0.25, 1.0)
    assert rc.B_fgm == pytest.approx(4.0, abs=1e-12)
    assert rc.B_amgs == pytest.approx((1 + math.sqrt(1 / 6)) ** 2, abs=1e-12)
    assert abs(rc.B_amgs - 1.9832) < 1e-4
    assert rc.base_ratio == pytest.approx(0.704, abs=1e-3)
    assert rc.C_fgm == pytest.approx(0.5)


@pytest.mark.parametrize("q", Q_GRID)
def test_rate_constants_ratio_below_one(q):
    assert per_wtu_rate_constants(q, 2.0).base_ratio < 1.0


def test_rate_constants_small_q_limit():
    rc = per_wtu_rate_constants(1e-12, 1.0)
    assert rc.B_amgs == pytest.approx(1.0, abs=1e-5)
    assert rc.B_fgm == pytest.approx(1.0, abs=1e-5)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            per_wtu_rate_constants(bad, 1.0)


@given(st.lists(st.floats(0.1, 20), min_size=1, max_size=6), st.lists(st.floats(-5, 5),
       min_size=6, max_size=6), st.floats(0.0, 3.0))
def test_diagonal_minimizer_against_grid(d, c, lam):
    d = np.array(d)
    c = np.array(c[:d.size])
    x, F = diagonal_l1_minimizer(d, c, lam)
    for i in range(d.size):
        # prox form: argmin lam|z| + d/2 (z - c)^2 = prox of lam|.| with tau = 1/d
        z = brute_force_prox_1d(lambda t: lam * np.abs(t), c[i], 1 / d[i], lo=-6, hi=6,
                                n=120001)
        assert x[i] == pytest.approx(z, abs=2e-4)
    assert F == pytest.approx(0.5 * np.sum(d * (x - c) ** 2) + lam * np.abs(x).sum())


def _known_run(mu=0.0, iters=200, seed=0):
    inst = quadratic_l1_known(20, seed=seed, mu=mu)
    tr = run("acgm_es", inst.problem, inst.x0, RESIDUAL, max_iterations=iters,
             keep_iterates=True)
    return inst, tr


def test_certificate_passes_and_excludes_k0():
    inst, tr = _known_run()
    ok = certify_guarantee(tr, inst.x_star, inst.F_star, inst.x0)
    assert ok.size == len(tr) - 1
    assert ok.all()


def test_certificate_negative_control():
    inst, tr = _known_run()
    bad = copy.deepcopy(tr)
    k = 40
    r = bad.records[k]
    bad.records[k] = replace(r, F=inst.F_star + 10 * (r.F - inst.F_star) + 10.0)
    ok = certify_guarantee(bad, inst.x_star, inst.F_star, inst.x0)
    assert not ok[k - 1]
    assert ok[:k - 1].all() and ok[k:].all()


def test_gap_sequence_start_and_monotone():
    inst, tr = _known_run()
    gaps = gap_sequence(tr, inst.x_star, inst.F_star)
    d = inst.x0 - inst.x_star
    assert gaps[0] == pytest.approx(0.5 * d @ d)
    assert np.max(np.diff(gaps)) <= 1e-9


def test_gap_zero_when_started_at_solution():
    inst = quadratic_l1_known(20, seed=1)
    tr = run("acgm_es", inst.problem, inst.x_star, RESIDUAL, max_iterations=30,
             keep_iterates=True)
    np.testing.assert_allclose(gap_sequence(tr, inst.x_star, inst.F_star), 0.0, atol=1e-12)


def test_gap_sequence_needs_vertices():
    inst = quadratic_l1_known(5)
    tr = run("acgm_ex", inst.problem, inst.x0, RESIDUAL, max_iterations=3)
    with pytest.raises(ValueError):
        gap_sequence(tr, inst.x_star, inst.F_star)


def test_schedule_weights_match_runs():
    inst = quadratic_l1_known(10, seed=4)
    sched = np.geomspace(1.0, 16.0, 50)
    a = run("acgm_ex", inst.problem, inst.x0, L_schedule=sched).column("A")
    f = run("fista", inst.problem, inst.x0, L_schedule=sched).column("A")
    np.testing.assert_allclose(a, acgm_weights_for_schedule(sched), rtol=1e-12)
    np.testing.assert_allclose(f, fista_weights_for_schedule(sched), rtol=1e-12)
    # equal constant estimates make the two weight sequences coincide
    const = np.full(30, 4.0)
    np.testing.assert_allclose(acgm_weights_for_schedule(const),
                               fista_weights_for_schedule(const), rtol=1e-12)
