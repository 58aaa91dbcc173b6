import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acgm.bench.problems import lasso_synthetic, quadratic_l1_known
from acgm.linesearch import LineSearchParams
from acgm.problem import diagonal_quadratic_l1, eval_F
from acgm.solvers import (
    METHODS,
    acgm_es_init,
    acgm_es_iteration,
    acgm_ex_init,
    acgm_ex_iteration,
    acgm_weight_a,
    amgs_weight_a,
    extrapolation_beta,
    fgm_init,
    fgm_iteration,
    fista_t_update,
    run,
    t_update,
)

from conftest import half_norm_problem

RESIDUAL = LineSearchParams(L0=3.0, r_u=2.0, r_d=0.9, criterion="quadratic_residual")


def _bisect_root(fn, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(lo) * fn(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_weight_a_examples():
    assert acgm_weight_a(1.0, 0.0, 0.0, 0.0, 1.0) == pytest.approx(1.0)
    golden = _bisect_root(lambda a: a * a - (1 + a), 0.0, 10.0)
    assert acgm_weight_a(1.0, 1.0, 0.0, 0.0, 1.0) == pytest.approx(golden, rel=1e-12)
    assert golden == pytest.approx((1 + math.sqrt(5)) / 2)
    a = acgm_weight_a(1.0, 0.0, 0.01, 0.0, 1.0)
    assert a == pytest.approx(1.0)
    assert (1.0 + 0.01) * a * a == pytest.approx(a * (1.0 + 0.01 * a))
    with pytest.raises(ValueError):
        acgm_weight_a(1.0, 0.0, 0.5, 0.5, 0.5)


@given(st.floats(0.01, 100), st.floats(0, 1e4), st.floats(0, 2), st.floats(0, 1),
       st.floats(0.01, 100))
def test_weight_a_solves_its_quadratic(gamma, A, mu, frac, excess):
    mu_f = frac * mu
    L = mu_f + excess
    a = acgm_weight_a(gamma, A, mu, mu_f, L)
    mu_psi = mu - mu_f
    lhs = (L + mu_psi) * a * a
    rhs = (A + a) * (gamma + mu * a)
    assert a > 0
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_amgs_weight_example():
    assert amgs_weight_a(0.0, 0.0, 1.0) == pytest.approx(2.0)
    a = amgs_weight_a(3.0, 0.2, 5.0)
    assert 5.0 * a * a == pytest.approx(2 * (3.0 + a) * (1 + 0.2 * 3.0))


def test_t_update_examples():
    assert t_update(0.0, 0.3, 1.0, 2.0) == 1.0
    assert t_update(1.0, 0.0, 1.0, 1.0) == pytest.approx((1 + math.sqrt(5)) / 2)
    t = 3.0
    q = 1.0 / t ** 2
    assert t_update(t, q, 2.0, 2.0) == pytest.approx(t)


@given(st.floats(0, 1e3), st.floats(0, 0.99), st.floats(0.01, 100), st.floats(0.01, 100))
def test_t_update_is_positive_root(t, q, Lp, Lt):
    s = t_update(t, q, Lp, Lt)
    assert s > 0
    resid = s * s + s * (q * t * t - 1) - (Lt / Lp) * t * t
    scale = s * s + s * abs(q * t * t - 1) + (Lt / Lp) * t * t
    assert abs(resid) <= 1e-12 * max(scale, 1.0)


def test_extrapolation_beta_examples():
    assert extrapolation_beta(1.0, 1.618, 0.2) == 0.0
    assert extrapolation_beta(3.0, 4.0, 0.0) == pytest.approx(0.5)
    assert extrapolation_beta(2.0, 2.0, 0.5) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        extrapolation_beta(2.0, 2.0, 1.0)


def test_fista_t_examples():
    assert fista_t_update(0.0) == 1.0
    assert fista_t_update(1.0) == pytest.approx((1 + math.sqrt(5)) / 2)


def test_es_first_iteration_hand_trace():
    # f = 1/2 x^2 declared with mu = 0, as in the hand trace
    prob = half_norm_problem()
    prob = type(prob)(prob.f, prob.grad, prob.psi, prob.prox)
    params = LineSearchParams(L0=1.0 / 0.9, r_d=0.9)
    state, out = acgm_es_iteration(prob, params, acgm_es_init(np.array([1.0]), params.L0))
    assert out.accepted_L == pytest.approx(1.0) and out.backtrack_count == 0
    assert state.A == pytest.approx(1.0)
    np.testing.assert_allclose(state.y, [1.0])
    np.testing.assert_allclose(state.x, [0.0], atol=1e-15)
    np.testing.assert_allclose(state.v, [0.0], atol=1e-15)


def test_ex_first_iteration_starts_at_x0(rng):
    inst = lasso_synthetic(20, 30, seed=2)
    x0 = rng.normal(size=30)
    state, _ = acgm_ex_iteration(inst.problem, LineSearchParams(L0=5.0),
                                 acgm_ex_init(inst.problem, x0, 5.0))
    np.testing.assert_array_equal(state.y, x0)


@pytest.mark.parametrize("mu", [0.0, 0.5])
def test_es_invariants(mu):
    inst = quadratic_l1_known(15, seed=3, mu=mu, L=10.0)
    p = inst.problem
    tr = run("acgm_es", p, inst.x0, RESIDUAL, max_iterations=150, keep_iterates=True)
    A = tr.column("A")
    L = tr.column("L")
    for k in range(1, len(tr)):
        g = tr.gammas[k]
        assert g == pytest.approx(1 + A[k] * p.mu, rel=1e-9)
        a = A[k] - A[k - 1]
        assert (L[k] + p.mu_psi) * a * a == pytest.approx(A[k] * g, rel=1e-9)
        pred = tr.xs[k - 1] + (A[k] / a) * (tr.xs[k] - tr.xs[k - 1])
        np.testing.assert_allclose(tr.vs[k], pred, rtol=1e-9,
                                   atol=1e-9 * np.linalg.norm(tr.vs[k]))
    if mu == 0.0:
        assert all(g == 1.0 for g in tr.gammas)


def test_fista_cp_matches_fixed_step_fista(rng):
    inst = lasso_synthetic(30, 40, seed=4)
    p = inst.problem
    L = p.lf_hint
    tr = run("fista_cp", p, inst.x0, max_iterations=60, keep_iterates=True)
    # constant-step FISTA in its usual ordering: y_1 = x_0, t_1 = 1
    y, t = inst.x0.copy(), 1.0
    x_prev = inst.x0
    for k in range(1, 61):
        x = p.prox(y - p.grad(y) / L, 1 / L)
        np.testing.assert_allclose(tr.xs[k], x, rtol=1e-10, atol=1e-12)
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = x + ((t - 1) / t_next) * (x - x_prev)
        x_prev, t = x, t_next


def test_fista_cp_true_constant_always_passes_descent():
    from acgm.linesearch import descent_accepts
    inst = quadratic_l1_known(10, seed=5, mu=0.0)
    p = inst.problem
    tr = run("fista_cp", p, inst.x0, max_iterations=50, keep_iterates=True)
    for x, y in zip(tr.xs[1:], tr.ys[1:]):
        assert descent_accepts(p, y, x, p.lf_hint)


def test_fista_without_backtracks_matches_fixed_step_acgm():
    inst = lasso_synthetic(30, 40, seed=6)
    p = inst.problem
    sched = np.full(80, p.lf_hint)
    a = run("fista", p, inst.x0, L_schedule=sched, keep_iterates=True)
    b = run("acgm_ex", p, inst.x0, L_schedule=sched, keep_iterates=True)
    for xa, xb in zip(a.xs, b.xs):
        np.testing.assert_allclose(xa, xb, rtol=1e-10, atol=1e-12)


def test_fista_estimates_never_decrease():
    inst = lasso_synthetic(30, 40, seed=7)
    tr = run("fista", inst.problem, inst.x0, LineSearchParams(L0=0.01), max_iterations=100)
    assert np.all(np.diff(tr.column("L")[1:]) >= 0)


def test_fgm_one_step_solves_unit_quadratic():
    prob = diagonal_quadratic_l1(np.ones(3), np.zeros(3), 0.0)
    prob = type(prob)(prob.f, prob.grad, prob.psi, prob.prox, kind="zero", lf_hint=1.0)
    state, _ = fgm_iteration(prob, 1.0, fgm_init(prob, np.array([1.0, -2.0, 0.5]), 1.0))
    np.testing.assert_allclose(state.x, 0.0, atol=1e-15)


def test_fgm_rejects_regularizer():
    inst = quadratic_l1_known(5, seed=0)
    with pytest.raises(ValueError):
        run("fgm", inst.problem, inst.x0, max_iterations=2)


def _smooth_diag(mu, L=10.0, n=20, seed=0):
    r = np.random.default_rng(seed)
    d = r.uniform(mu, L, n)
    d[0], d[1] = mu, L
    prob = diagonal_quadratic_l1(d, r.normal(size=n), 0.0)
    if mu == 0.0:
        prob = type(prob)(prob.f, prob.grad, prob.psi, prob.prox, lf_hint=L, kind="zero")
    return prob, r.normal(size=n)


def test_fgm_sublinear_floor():
    prob, x0 = _smooth_diag(0.0)
    tr = run("fgm", prob, x0, max_iterations=300)
    for r in tr.records:
        assert r.A >= (r.wtu + 2) ** 2 / (8 * 10.0) * (1 - 1e-12)


def test_fgm_linear_rate():
    mu, L = 0.1, 10.0
    prob, x0 = _smooth_diag(mu, L)
    A = run("fgm", prob, x0, max_iterations=200).column("A")
    q = mu / L
    assert A[-1] / A[-2] > 1 / (1 - math.sqrt(q))


def test_budget_zero_gives_initial_record():
    inst = quadratic_l1_known(5)
    for m in METHODS:
        if m == "fgm":
            continue
        tr = run(m, inst.problem, inst.x0, max_iterations=0)
        assert len(tr) == 1 and tr.records[0].k == 0 and tr.records[0].wtu == 0
        assert tr.records[0].F == pytest.approx(eval_F(inst.problem, inst.x0))


@pytest.mark.parametrize("method", ["acgm_es", "acgm_ex", "fista", "fista_cp", "amgs"])
def test_wtu_budget_and_records(method):
    inst = lasso_synthetic(40, 60, seed=1)
    tr = run(method, inst.problem, inst.x0, LineSearchParams(L0=0.5), max_wtu=157)
    w = tr.column("wtu")
    assert w[-1] <= 157
    assert np.all(np.diff(w) >= 0)
    assert np.all(np.isfinite(tr.column("F")[1:]))
    assert list(tr.column("k")) == list(range(len(tr)))


@pytest.mark.parametrize("method", ["acgm_ex", "amgs", "fista"])
def test_runs_are_deterministic(method):
    inst = lasso_synthetic(40, 60, seed=1)
    a = run(method, inst.problem, inst.x0, LineSearchParams(L0=0.5), max_iterations=80)
    b = run(method, inst.problem, inst.x0, LineSearchParams(L0=0.5), max_iterations=80)
    assert a.records == b.records


def test_line_search_failure_marks_trace():
    inst = lasso_synthetic(20, 30, seed=1)
    params = LineSearchParams(L0=1e-9, max_backtracks=3)
    tr = run("acgm_ex", inst.problem, inst.x0, params, max_iterations=10)
    assert tr.status == "line_search_failed" and not tr.ok
    assert len(tr) == 1 and "backtracks" in tr.error


def test_descent_rule_and_lower_bound_at_accepted_steps(rng):
    from acgm.problem import relaxed_lower_bound
    inst = quadratic_l1_known(12, seed=8, mu=0.3)
    p = inst.problem
    tr = run("acgm_es", p, inst.x0, RESIDUAL, max_iterations=60, keep_iterates=True)
    for r, x, y in zip(tr.records[1:], tr.xs[1:], tr.ys[1:]):
        L_eff = r.L + p.mu_psi
        g = L_eff * (y - x)
        assert eval_F(p, x) <= eval_F(p, y) - g @ g / (2 * L_eff) + 1e-12
        for _ in range(100):
            z = 3 * rng.normal(size=12)
            assert relaxed_lower_bound(p, y, x, r.L, z) <= eval_F(p, z) + 1e-9


def test_stop_tol_ends_run_early():
    inst = quadratic_l1_known(10, seed=2, mu=1.0)
    tr = run("acgm_ex", inst.problem, inst.x0, RESIDUAL, max_iterations=5000, stop_tol=1e-10)
    assert len(tr) < 5001
    np.testing.assert_allclose(tr.x_final, inst.x_star, atol=1e-8)


def test_run_validation():
    inst = quadratic_l1_known(5)
    with pytest.raises(ValueError):
        run("newton", inst.problem, inst.x0, max_iterations=1)
    with pytest.raises(ValueError):
        run("acgm_ex", inst.problem, inst.x0)
    with pytest.raises(ValueError):
        run("acgm_ex", inst.problem, inst.x0, max_iterations=-1)
    with pytest.raises(ValueError):
        run("amgs", inst.problem, inst.x0, L_schedule=[1.0, 2.0])


@pytest.mark.parametrize("seed", range(3))
def test_forms_agree_with_strongly_convex_regularizer(seed):
    from acgm.bench.problems import huber_rof_instance
    inst = huber_rof_instance(5, seed=seed, noise_std=0.1,
                              image=np.random.default_rng(seed).uniform(size=(5, 5)))
    p = inst.problem
    assert p.mu_psi == pytest.approx(0.01) and p.mu_f == 0
    params = LineSearchParams(L0=1.0, r_d=0.95, criterion="quadratic_residual")
    es = run("acgm_es", p, inst.x0, params, max_iterations=100, keep_iterates=True)
    ex = run("acgm_ex", p, inst.x0, params, max_iterations=100, keep_iterates=True)
    np.testing.assert_array_equal(es.column("backtracks"), ex.column("backtracks"))
    for a, b in zip(es.xs, ex.xs):
        assert np.linalg.norm(a - b) <= 1e-8 * max(np.linalg.norm(a), 1e-300)
