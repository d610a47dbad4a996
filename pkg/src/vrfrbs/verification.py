"""Empirical certification of the estimator contracts.

Every estimator kind promises, conditionally on the frozen past, either a
zero-mean error (unbiased kinds) or a geometrically shrinking conditional
mean (biased kinds), together with a variance recursion driven by iterate
differences.  This module realizes those conditional statements by freezing
an estimator state and a short iterate history, then randomizing only the
next step's draws:

* Monte-Carlo mode clones the frozen state per trial with independent RNG
  substreams and reports the margin in standard errors.
* Enumeration mode (tiny instances: n <= 6 components, batches <= 2) sums
  over every batch/switch outcome and checks the identity exactly.

Reports serialize to one line per check:
    name, trials, mean_norm, se, target_norm, margin_sigmas, pass
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import InclusionProblem
from .estimators import (BIASED_KINDS, SAGA, SARAH, SGD, SVRG, FULL, HSGD,
                         HSVRG, UNBIASED_KINDS, EstimatorParams,
                         EstimatorState, _apply_step, _sgd_batch_size,
                         estimator_step, make_estimator, theory_card)

DEFAULT_SIGMA_THRESHOLD = 4.0
ENUM_TOL = 1e-12


@dataclass
class McReport:
    """Outcome of one certification check."""

    name: str
    trials: int
    sample_mean: np.ndarray  # vector (mean error) or 1-element array (scalar)
    std_error: float
    target: np.ndarray
    margin_sigmas: float
    passed: bool
    threshold: float = DEFAULT_SIGMA_THRESHOLD
    exact: bool = False

    def to_line(self) -> str:
        mean_norm = float(np.linalg.norm(self.sample_mean))
        target_norm = float(np.linalg.norm(self.target))
        return (f"{self.name}, {self.trials}, {mean_norm:.17g}, "
                f"{self.std_error:.17g}, {target_norm:.17g}, "
                f"{self.margin_sigmas:.17g}, {'pass' if self.passed else 'fail'}")


def write_reports(path, reports) -> None:
    with open(path, "w", newline="\n") as fh:
        for rep in reports:
            fh.write(rep.to_line() + "\n")


# ---------------------------------------------------------------------------
# Frozen histories
# ---------------------------------------------------------------------------

@dataclass
class FrozenHistory:
    """An estimator state frozen after a short warm-up, plus the rolling
    points (x_k, x_{k-1}, x_{k-2}) for the randomized step and the realized
    recursion quantities of the warmed-up state."""

    state: EstimatorState
    x_k: np.ndarray
    x_km1: np.ndarray
    x_km2: np.ndarray
    e_prev: Optional[np.ndarray] = None      # e_{k-1}, biased kinds
    delta_prev: float = 0.0                  # realized Delta_{k-1}
    delta_k: float = 0.0                     # realized delta_k slack

    @property
    def problem(self) -> InclusionProblem:
        return self.state.problem


def _component_values(problem: InclusionProblem, x: np.ndarray) -> np.ndarray:
    op = problem.forward
    return op.batch_components(np.asarray(x, float), np.arange(op.n))


def _exact_direction_value(problem, x, x1):
    op = problem.forward
    return 2.0 * op.full(np.asarray(x, float)) - op.full(np.asarray(x1, float))


def _per_sample_deviation(problem, x, x1, anchor_point, b) -> float:
    """(1/b) mean_i ||2 G_i(x) - G_i(x1) - G_i(anchor)||^2."""
    vals = 2.0 * _component_values(problem, x) \
        - _component_values(problem, x1) \
        - _component_values(problem, anchor_point)
    return float(np.einsum("ij,ij->i", vals, vals).mean()) / b


def _direction_variance(problem, x, x1) -> float:
    """Var_i(2 G_i(x) - G_i(x1)) for a single uniform draw."""
    vals = 2.0 * _component_values(problem, x) - _component_values(problem, x1)
    mean = vals.mean(axis=0)
    dev = vals - mean
    return float(np.einsum("ij,ij->i", dev, dev).mean())


def build_history(kind: str, params: EstimatorParams,
                  problem: InclusionProblem, seed, warmup: int = 3,
                  step_scale: float = 0.5) -> FrozenHistory:
    """Warm an estimator along a synthetic trajectory and freeze it.

    The trajectory is x_{j+1} = x_j + step_scale * z_j with Gaussian z_j;
    `warmup` estimator steps populate tables, snapshots, and recursion
    state.  The realized recursion quantities follow each kind's own
    bookkeeping: per-sample anchor deviations for svrg-style kinds (the
    frozen snapshot is the pre-step one), the squared previous error for
    the recursion kinds, their combination for hsvrg, and the table-based
    deviation for saga (captured against the table entering the last
    warm-up step).
    """
    dim = problem.dim
    rng = np.random.default_rng(np.random.SeedSequence([0xA11CE, seed]))
    points = [rng.standard_normal(dim)]
    for _ in range(warmup + 1):
        points.append(points[-1] + step_scale * rng.standard_normal(dim))

    state = make_estimator(kind, params, problem, points[0], seed=(0xBEE, seed))
    pre_table = None
    for j in range(1, warmup + 1):
        if kind == SAGA and j == warmup:
            pre_table = state.table.copy()
        estimator_step(state, points[j], points[j - 1], points[max(j - 2, 0)])

    x_k, x_km1, x_km2 = points[warmup + 1], points[warmup], points[warmup - 1]
    hist = FrozenHistory(state=state, x_k=x_k, x_km1=x_km1, x_km2=x_km2)

    if kind in BIASED_KINDS:
        hist.e_prev = state.s_tilde - _exact_direction_value(problem, x_km1, x_km2)

    b = int(params.b)
    if kind == SVRG:
        hist.delta_prev = _per_sample_deviation(problem, x_km1, x_km2,
                                                state.snapshot, b)
    elif kind == SAGA:
        vals = 2.0 * _component_values(problem, x_km1) \
            - _component_values(problem, x_km2) - pre_table
        hist.delta_prev = float(np.einsum("ij,ij->i", vals, vals).mean()) / b
    elif kind in (SARAH, HSGD):
        hist.delta_prev = float(np.dot(hist.e_prev, hist.e_prev))
    elif kind == HSVRG:
        d_prev = _per_sample_deviation(problem, x_km1, x_km2, state.snapshot, b)
        p = params.p_switch
        hist.delta_prev = float(np.dot(hist.e_prev, hist.e_prev)) \
            + (4.0 / p - 1.0) * params.omega ** 2 * d_prev
    elif kind == SGD:
        # kappa = 1: Delta_{k-1} does not enter the recursion bound
        hist.delta_prev = 0.0

    # realized slack delta_k for the step under test
    if kind == SGD:
        probe = state.clone(np.random.default_rng(0))
        probe.k += 1
        b_k = _sgd_batch_size(probe, x_k, x_km1, x_km2)
        hist.delta_k = _direction_variance(problem, x_k, x_km1) / b_k
    elif kind == HSGD:
        sigma_k2 = _direction_variance(problem, x_k, x_km1) / b
        c_share = 2.0 if params.share_batches else 1.0
        hist.delta_k = c_share * params.omega ** 2 * sigma_k2
    return hist


# ---------------------------------------------------------------------------
# Exact enumeration of step outcomes
# ---------------------------------------------------------------------------

def _enumeration_branches(history: FrozenHistory):
    """All (probability, draws) outcomes of the next step on tiny instances."""
    state, params = history.state, history.state.params
    kind = state.kind
    op = state.problem.forward
    n = op.n
    if n is None:
        raise ValueError("enumeration needs a finite-sum operator")
    if params.mega_batch != "exact" and kind in (SVRG, SARAH, HSVRG):
        raise ValueError("enumeration supports exact anchors only")

    def batches(size):
        prob = 1.0 / n ** size
        for combo in itertools.product(range(n), repeat=size):
            yield prob, np.array(combo, dtype=int)

    if kind == FULL:
        return [(1.0, {})]
    if kind == SGD:
        probe = state.clone(np.random.default_rng(0))
        probe.k += 1
        b_k = _sgd_batch_size(probe, history.x_k, history.x_km1, history.x_km2)
        return [(pb, {"batch": idx}) for pb, idx in batches(b_k)]

    b = int(params.b)
    branches = []
    if kind == SVRG:
        p = params.p_switch
        for coin, pc in ((True, p), (False, 1.0 - p)):
            if pc == 0.0:
                continue
            for pb, idx in batches(b):
                branches.append((pc * pb, {"coin": coin, "batch": idx}))
        return branches
    if kind == SAGA:
        return [(pb, {"batch": idx}) for pb, idx in batches(b)]
    if kind == SARAH:
        p = params.p_switch
        branches.append((p, {"coin": True}))
        if p < 1.0:
            for pb, idx in batches(b):
                branches.append(((1.0 - p) * pb, {"coin": False, "batch": idx}))
        return branches
    if kind == HSGD:
        if params.share_batches:
            return [(pb, {"batch": idx, "batch_hat": idx})
                    for pb, idx in batches(b)]
        return [(pb * pb2, {"batch": idx, "batch_hat": idx2})
                for pb, idx in batches(b) for pb2, idx2 in batches(b)]
    if kind == HSVRG:
        p = params.p_switch
        for coin, pc in ((True, p), (False, 1.0 - p)):
            if pc == 0.0:
                continue
            for pb, idx in batches(b):
                if params.share_batches:
                    branches.append((pc * pb,
                                     {"coin": coin, "batch": idx,
                                      "batch_hat": idx}))
                else:
                    for pb2, idx2 in batches(b):
                        branches.append((pc * pb * pb2,
                                         {"coin": coin, "batch": idx,
                                          "batch_hat": idx2}))
        return branches
    raise ValueError(f"unknown estimator kind {kind!r}")


def enumerate_step_mean(history: FrozenHistory):
    """Exact E[S_tilde_k | frozen past] and the number of outcomes."""
    branches = _enumeration_branches(history)
    mean = np.zeros(history.problem.dim)
    total = 0.0
    for prob, draws in branches:
        clone = history.state.clone(np.random.default_rng(0))
        clone.k += 1
        value, _ = _apply_step(clone, history.x_k, history.x_km1,
                               history.x_km2, draws)
        mean += prob * value
        total += prob
    if abs(total - 1.0) > 1e-12:
        raise AssertionError(f"branch probabilities sum to {total}")
    return mean, len(branches)


# ---------------------------------------------------------------------------
# Monte-Carlo engine
# ---------------------------------------------------------------------------

def _mc_errors(history: FrozenHistory, trials: int, seed):
    """Stream (e_k vector, ||e_k||^2) over cloned trials."""
    s_true = _exact_direction_value(history.problem, history.x_k, history.x_km1)
    base = np.random.SeedSequence([0xC0FFEE, seed])
    streams = base.spawn(trials)
    for t in range(trials):
        clone = history.state.clone(np.random.default_rng(streams[t]))
        value, _ = estimator_step(clone, history.x_k, history.x_km1,
                                  history.x_km2)
        err = value - s_true
        yield err, float(np.dot(err, err))


def _vector_report(name, trials, mean_vec, m2_vec, target, threshold):
    """Aggregate a vector-mean check: ||mean - target|| vs combined SE."""
    diff = mean_vec - target
    if trials > 1:
        se = math.sqrt(float(m2_vec.sum()) / (trials - 1) / trials)
    else:
        se = 0.0
    dn = float(np.linalg.norm(diff))
    if se == 0.0:
        margin = 0.0 if dn == 0.0 else math.inf
    else:
        margin = dn / se
    return McReport(name=name, trials=trials, sample_mean=mean_vec,
                    std_error=se, target=target, margin_sigmas=margin,
                    passed=margin <= threshold, threshold=threshold)


def check_unbiased(history: FrozenHistory, trials: int = 100_000, seed: int = 0,
                   threshold: float = DEFAULT_SIGMA_THRESHOLD,
                   mode: str = "mc") -> McReport:
    """Certify E[S_tilde_k | frozen past] = S_k for an unbiased kind.

    mode="enumerate" sums all outcomes on tiny instances and requires the
    mean error to vanish to 1e-12 (relative to the direction's size).
    """
    kind = history.state.kind
    if kind not in UNBIASED_KINDS:
        raise ValueError(f"{kind} is not an unbiased estimator kind")
    s_true = _exact_direction_value(history.problem, history.x_k, history.x_km1)
    name = f"unbiased/{kind}"
    if mode == "enumerate":
        mean, outcomes = enumerate_step_mean(history)
        err = mean - s_true
        tol = ENUM_TOL * (1.0 + float(np.linalg.norm(s_true)))
        dn = float(np.linalg.norm(err))
        return McReport(name=name, trials=outcomes, sample_mean=err,
                        std_error=0.0, target=np.zeros_like(err),
                        margin_sigmas=0.0 if dn <= tol else math.inf,
                        passed=dn <= tol, threshold=threshold, exact=True)
    mean = np.zeros(history.problem.dim)
    m2 = np.zeros(history.problem.dim)
    count = 0
    for err, _ in _mc_errors(history, trials, seed):
        count += 1
        delta = err - mean
        mean += delta / count
        m2 += delta * (err - mean)
    return _vector_report(name, count, mean, m2, np.zeros_like(mean), threshold)


def check_bias_recursion(history: FrozenHistory, trials: int = 100_000,
                         seed: int = 0,
                         threshold: float = DEFAULT_SIGMA_THRESHOLD,
                         mode: str = "mc") -> McReport:
    """Certify E[e_k | frozen past] = (1 - tau) e_{k-1} for a biased kind."""
    kind = history.state.kind
    if kind not in BIASED_KINDS:
        raise ValueError(f"{kind} is not a biased estimator kind")
    if history.e_prev is None:
        raise ValueError("history does not carry e_{k-1}")
    card = theory_card(kind, history.state.params, history.problem.lipschitz,
                       n=getattr(history.problem.forward, "n", None))
    target = (1.0 - card.tau) * history.e_prev
    name = f"bias-recursion/{kind}"
    if mode == "enumerate":
        mean, outcomes = enumerate_step_mean(history)
        s_true = _exact_direction_value(history.problem, history.x_k,
                                        history.x_km1)
        err = (mean - s_true) - target
        tol = ENUM_TOL * (1.0 + float(np.linalg.norm(s_true)))
        dn = float(np.linalg.norm(err))
        return McReport(name=name, trials=outcomes, sample_mean=mean - s_true,
                        std_error=0.0, target=target,
                        margin_sigmas=0.0 if dn <= tol else math.inf,
                        passed=dn <= tol, threshold=threshold, exact=True)
    mean = np.zeros(history.problem.dim)
    m2 = np.zeros(history.problem.dim)
    count = 0
    for err, _ in _mc_errors(history, trials, seed):
        count += 1
        delta = err - mean
        mean += delta / count
        m2 += delta * (err - mean)
    return _vector_report(name, count, mean, m2, target, threshold)


def check_variance_recursion(history: FrozenHistory, trials: int = 100_000,
                             seed: int = 0,
                             threshold: float = DEFAULT_SIGMA_THRESHOLD) -> McReport:
    """One-sided check of the variance recursion at the theory-card
    constants: the Monte-Carlo mean of ||e_k||^2 must not exceed

        (1 - kappa) Delta_{k-1} + Theta ||dx||^2 + Theta_hat ||dx'||^2
            + delta_k

    by more than `threshold` standard errors, with Delta_{k-1} and delta_k
    realized by `build_history`.
    """
    state = history.state
    card = theory_card(state.kind, state.params, state.problem.lipschitz,
                       n=getattr(state.problem.forward, "n", None))
    dx = history.x_k - history.x_km1
    dxp = history.x_km1 - history.x_km2
    rhs = (1.0 - card.kappa) * history.delta_prev \
        + card.theta * float(np.dot(dx, dx)) \
        + card.theta_hat * float(np.dot(dxp, dxp)) \
        + history.delta_k
    mean = 0.0
    m2 = 0.0
    count = 0
    for _, sq in _mc_errors(history, trials, seed):
        count += 1
        delta = sq - mean
        mean += delta / count
        m2 += delta * (sq - mean)
    se = math.sqrt(m2 / (count - 1) / count) if count > 1 else 0.0
    if se == 0.0:
        margin = -math.inf if mean <= rhs else math.inf
    else:
        margin = (mean - rhs) / se
    return McReport(name=f"variance-recursion/{state.kind}", trials=count,
                    sample_mean=np.array([mean]), std_error=se,
                    target=np.array([rhs]), margin_sigmas=margin,
                    passed=mean <= rhs + threshold * se, threshold=threshold)
