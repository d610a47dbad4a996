import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrfrbs.core import FiniteSumOperator, InclusionProblem, identity_resolvent, UnsupportedConfigError
from vrfrbs.estimators import (KINDS, EstimatorParams, estimator_step,
                               make_estimator)
from vrfrbs.problems import linear_toy

from helpers import instrumented_problem


def components_only_problem(n=4, dim=3, seed=0):
    """Affine finite sum whose full evaluation is the literal component
    mean (no closed-form fast path), so full-batch collapses are bit-exact."""
    rng = np.random.default_rng(seed)
    B = np.stack([np.eye(dim) + 0.3 * rng.standard_normal((dim, dim))
                  for _ in range(n)])
    c = rng.standard_normal((n, dim))

    def batch_components(x, idx):
        return B[idx] @ x + c[idx]

    op = FiniteSumOperator(n=n, dim=dim, batch_components=batch_components,
                           lipschitz=3.0)
    return InclusionProblem(forward=op, resolvent=identity_resolvent(),
                            lipschitz=3.0)


def params_for(kind, n, b=None):
    b = b if b is not None else max(1, n // 2)
    if kind == "full":
        return EstimatorParams()
    if kind == "sgd":
        return EstimatorParams(b=b)
    if kind == "svrg":
        return EstimatorParams(b=b, p_switch=0.5)
    if kind == "saga":
        return EstimatorParams(b=b)
    if kind == "sarah":
        return EstimatorParams(b=b, p_switch=0.5)
    if kind == "hsgd":
        return EstimatorParams(b=b, omega=0.4)
    if kind == "hsvrg":
        return EstimatorParams(b=b, p_switch=0.5, omega=0.4)
    raise ValueError(kind)


def true_direction(problem, x, x1):
    return 2.0 * problem.forward.full(x) - problem.forward.full(x1)


# --- initialization --------------------------------------------------------

def test_saga_init_fills_table():
    prob = components_only_problem(n=4)
    x0 = np.array([0.5, -1.0, 2.0])
    st_ = make_estimator("saga", params_for("saga", 4), prob, x0, seed=0)
    idx = np.arange(4)
    rows = prob.forward.batch_components(x0, idx)
    assert np.array_equal(st_.table, rows)
    assert np.allclose(st_.table_mean, rows.mean(axis=0))
    assert np.array_equal(st_.s_tilde, rows.mean(axis=0))
    assert st_.init_calls == 4


def test_full_batch_initial_direction():
    prob = components_only_problem()
    x0 = np.ones(3)
    st_ = make_estimator("full", params_for("full", 4), prob, x0, seed=0)
    assert np.array_equal(st_.s_tilde, prob.forward.full(x0))


def test_svrg_initial_direction_is_exact():
    # with w_0 = x_{-1} = x_0 the correction terms cancel and the initial
    # estimate equals the exact mean at x_0
    prob = components_only_problem(n=3)
    x0 = np.array([1.0, 0.0, -2.0])
    st_ = make_estimator("svrg", EstimatorParams(b=1, p_switch=0.5), prob,
                         x0, seed=7)
    assert np.allclose(st_.s_tilde, prob.forward.full(x0))
    assert st_.init_calls == 3


def test_saga_rejects_oracle():
    from vrfrbs.core import StochasticOracle
    oracle = StochasticOracle(
        dim=2,
        sampler=lambda rng, size: rng.standard_normal((size, 2)),
        evaluator=lambda x, xi: x[None, :] + xi,
        variance_bound=2.0, lipschitz=1.0)
    prob = InclusionProblem(forward=oracle, resolvent=identity_resolvent(),
                            lipschitz=1.0)
    with pytest.raises(UnsupportedConfigError):
        make_estimator("saga", EstimatorParams(b=1), prob, np.zeros(2), seed=0)


def test_param_validation():
    prob = components_only_problem(n=4)
    with pytest.raises(ValueError):
        make_estimator("svrg", EstimatorParams(b=1), prob, np.zeros(3), seed=0)
    with pytest.raises(ValueError):
        make_estimator("hsgd", EstimatorParams(b=1, omega=1.5), prob,
                       np.zeros(3), seed=0)
    with pytest.raises(ValueError):
        make_estimator("sgd", EstimatorParams(b=9), prob, np.zeros(3), seed=0)


# --- stepping --------------------------------------------------------------

def test_full_batch_step_value_and_calls():
    prob = components_only_problem()
    x0 = np.zeros(3)
    st_ = make_estimator("full", EstimatorParams(), prob, x0, seed=0)
    x1 = np.array([0.2, -0.1, 0.4])
    value, calls = estimator_step(st_, x1, x0, x0)
    assert np.array_equal(value, true_direction(prob, x1, x0))
    assert calls == 2 * 4


def test_full_batch_retained_charges_n():
    prob = components_only_problem()
    x0 = np.zeros(3)
    st_ = make_estimator("full", EstimatorParams(retain_full=True), prob,
                         x0, seed=0)
    x1 = np.array([0.2, -0.1, 0.4])
    _, calls = estimator_step(st_, x1, x0, x0)
    assert calls == 4  # G(x0) retained from initialization
    x2 = x1 + 0.1
    _, calls = estimator_step(st_, x2, x1, x0)
    assert calls == 4


def test_saga_full_batch_collapse():
    prob = components_only_problem(n=4)
    x0 = np.array([0.1, 0.2, 0.3])
    st_ = make_estimator("saga", EstimatorParams(b=4), prob, x0, seed=0)
    # replace sampling by the full index set via the injected-draw core
    from vrfrbs.estimators import _apply_step
    st_.k += 1
    x1 = x0 + 0.5
    value, _ = _apply_step(st_, x1, x0, x0, {"batch": np.arange(4)})
    expected = 2.0 * prob.forward.batch_mean(x1, np.arange(4)) \
        - prob.forward.batch_mean(x0, np.arange(4))
    assert np.array_equal(value, expected)


def test_saga_table_rows_updated_only_for_batch():
    prob = components_only_problem(n=6)
    x0 = np.zeros(3)
    st_ = make_estimator("saga", EstimatorParams(b=2), prob, x0, seed=5)
    before = st_.table.copy()
    x1 = np.ones(3)
    from vrfrbs.estimators import _apply_step
    st_.k += 1
    batch = np.array([1, 4, 4])
    _apply_step(st_, x1, x0, x0, {"batch": batch})
    rows_x0 = prob.forward.batch_components(x0, np.arange(6))
    for i in range(6):
        if i in (1, 4):
            assert np.array_equal(st_.table[i], rows_x0[i])
        else:
            assert np.array_equal(st_.table[i], before[i])


def test_saga_running_mean_stays_synced():
    prob = components_only_problem(n=8)
    rng = np.random.default_rng(3)
    x0 = rng.standard_normal(3)
    st_ = make_estimator("saga", EstimatorParams(b=3), prob, x0, seed=1)
    pts = [x0]
    for _ in range(200):
        pts.append(pts[-1] + 0.1 * rng.standard_normal(3))
    for k in range(1, 201):
        estimator_step(st_, pts[k], pts[k - 1], pts[max(k - 2, 0)])
        exact = st_.table.mean(axis=0)
        err = np.linalg.norm(st_.table_mean - exact)
        assert err <= 1e-8 * (1 + np.linalg.norm(exact))


def test_sarah_always_switch_is_exact():
    prob = components_only_problem()
    x0 = np.zeros(3)
    st_ = make_estimator("sarah", EstimatorParams(b=1, p_switch=1.0), prob,
                         x0, seed=0)
    x1 = np.array([1.0, -1.0, 0.5])
    value, _ = estimator_step(st_, x1, x0, x0)
    assert np.allclose(value, true_direction(prob, x1, x0), atol=1e-15)


def test_hsgd_omega_one_is_plain_minibatch():
    prob = components_only_problem(n=4)
    x0 = np.zeros(3)
    st_ = make_estimator("hsgd", EstimatorParams(b=2, omega=1.0), prob,
                         x0, seed=0)
    from vrfrbs.estimators import _apply_step
    st_.k += 1
    x1 = np.ones(3)
    batch = np.array([0, 2])
    value, _ = _apply_step(st_, x1, x0, x0,
                           {"batch": batch, "batch_hat": batch})
    expected = 2.0 * prob.forward.batch_mean(x1, batch) \
        - prob.forward.batch_mean(x0, batch)
    assert np.allclose(value, expected, atol=1e-15)


def test_sgd_two_outcomes_enumerated_by_hand():
    # n = 2, b = 1: the two possible draws and their mean
    prob = components_only_problem(n=2)
    op = prob.forward
    x0 = np.zeros(3)
    x1 = np.array([0.4, -0.2, 0.1])
    outcomes = []
    from vrfrbs.estimators import _apply_step
    for i in (0, 1):
        st_ = make_estimator("sgd", EstimatorParams(b=1), prob, x0, seed=0)
        st_.k += 1
        value, _ = _apply_step(st_, x1, x0, x0, {"batch": np.array([i])})
        hand = 2.0 * op.batch_components(x1, np.array([i]))[0] \
            - op.batch_components(x0, np.array([i]))[0]
        assert np.allclose(value, hand, atol=1e-15)
        outcomes.append(value)
    mean = 0.5 * (outcomes[0] + outcomes[1])
    assert np.allclose(mean, true_direction(prob, x1, x0), atol=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_full_index_collapse_reproduces_direction(kind):
    """With sampling replaced by the full index set and switching at its
    deterministic extreme, every estimator reproduces the exact direction."""
    from vrfrbs.estimators import _apply_step
    n = 4
    prob = components_only_problem(n=n)
    x0 = np.array([0.3, -0.2, 0.1])
    if kind == "full":
        params = EstimatorParams()
    elif kind in ("sgd", "saga"):
        params = EstimatorParams(b=n)
    elif kind == "svrg":
        params = EstimatorParams(b=n, p_switch=1.0)
    elif kind == "sarah":
        params = EstimatorParams(b=n, p_switch=1.0)
    elif kind == "hsgd":
        params = EstimatorParams(b=n, omega=0.4)
    else:
        params = EstimatorParams(b=n, p_switch=1.0, omega=0.4)
    st_ = make_estimator(kind, params, prob, x0, seed=0)
    full_idx = np.arange(n)
    rng = np.random.default_rng(9)
    pts = [x0, x0 + 0.5 * rng.standard_normal(3)]
    pts.append(pts[-1] + 0.5 * rng.standard_normal(3))
    for k in (1, 2):
        draws = {}
        if kind in ("svrg", "sarah", "hsvrg"):
            draws["coin"] = True
        if not (kind == "full" or (kind == "sarah")):
            draws["batch"] = full_idx
        if kind in ("hsgd", "hsvrg"):
            draws["batch_hat"] = full_idx
        st_.k += 1
        value, _ = _apply_step(st_, pts[k], pts[k - 1], pts[max(k - 2, 0)],
                               draws)
        st_.s_tilde = value
        expected = 2.0 * prob.forward.batch_mean(pts[k], full_idx) \
            - prob.forward.batch_mean(pts[k - 1], full_idx)
        assert np.allclose(value, expected, atol=1e-13), kind


@pytest.mark.parametrize("kind", KINDS)
def test_call_accounting_matches_instrumented_operator(kind):
    base = linear_toy(n=8, dim=3, seed=11)
    prob, wrapped = instrumented_problem(base)
    params = params_for(kind, 8, b=3)
    x0 = np.zeros(3)
    st_ = make_estimator(kind, params, prob, x0, seed=4)
    assert st_.init_calls == wrapped.observed
    rng = np.random.default_rng(21)
    pts = [x0]
    for _ in range(12):
        pts.append(pts[-1] + 0.3 * rng.standard_normal(3))
    for k in range(1, 13):
        before = wrapped.observed
        _, calls = estimator_step(st_, pts[k], pts[k - 1], pts[max(k - 2, 0)])
        assert calls == wrapped.observed - before, (kind, k)
    assert st_.calls == wrapped.observed


@pytest.mark.parametrize("kind", KINDS)
def test_step_sequence_deterministic_under_seed(kind):
    prob = linear_toy(n=6, dim=3, seed=2)
    params = params_for(kind, 6, b=2)
    rng = np.random.default_rng(33)
    pts = [np.zeros(3)]
    for _ in range(6):
        pts.append(pts[-1] + 0.2 * rng.standard_normal(3))

    def run_once():
        st_ = make_estimator(kind, params, prob, pts[0], seed=99)
        seq = [st_.s_tilde.copy()]
        for k in range(1, 7):
            v, _ = estimator_step(st_, pts[k], pts[k - 1], pts[max(k - 2, 0)])
            seq.append(v.copy())
        return seq

    a, b_ = run_once(), run_once()
    for u, v in zip(a, b_):
        assert np.array_equal(u, v)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=2, max_value=6), st.integers(min_value=1, max_value=4))
def test_sgd_schedule_clamped(n, k):
    from vrfrbs.estimators import increasing_batch_schedule
    sched = increasing_batch_schedule(n, coeff=10.0)
    assert 1 <= sched(k) <= n
