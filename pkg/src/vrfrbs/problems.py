"""Benchmark problem builders.

Two application families and synthetic test problems:

* AUC maximization with the square-loss saddle reformulation on an
  imbalanced synthetic dataset.  The variable is z = (w, a, b, alpha) in
  R^{d+3}; the mean operator is affine, G(z) = Q z + q, and the constraint
  sets are a ball on w and boxes on (a, b, alpha).

* Policy evaluation for a random MDP with linear value approximation.  The
  empirical projected-Bellman-error saddle problem has variable x =
  (theta, w) in R^{2d}, per-transition operators built from rank-one
  feature products, and an l1 regularizer on theta handled by a
  soft-threshold resolvent.

* Random affine monotone/bilinear toys used by tests and the verification
  suite, with exactly computable average-Lipschitz constants.

All generators are deterministic under a fixed seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .core import (FiniteSumOperator, InclusionProblem, Resolvent,
                   ball_box_resolvent, identity_resolvent,
                   soft_threshold_resolvent)


# ---------------------------------------------------------------------------
# Spectral norm via power iteration
# ---------------------------------------------------------------------------

def power_iteration(mat: np.ndarray, tol: float = 1e-10,
                    max_iters: int = 10_000, restarts: int = 2,
                    seed: int = 0):
    """Largest singular value of a dense matrix.

    Iterates v <- normalize(M^T M v) from `restarts` random starts and keeps
    the largest estimate.  Returns (sigma_max, converged).
    """
    mat = np.asarray(mat, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence([0x9A7E, seed]))
    best = 0.0
    converged = False
    for _ in range(max(1, restarts)):
        v = rng.standard_normal(mat.shape[1])
        v /= np.linalg.norm(v)
        sigma_prev = 0.0
        ok = False
        for _ in range(max_iters):
            u = mat @ v
            sigma = float(np.linalg.norm(u))
            if sigma == 0.0:
                ok = True
                break
            v = mat.T @ u
            v /= np.linalg.norm(v)
            if abs(sigma - sigma_prev) <= tol * max(sigma, 1.0):
                ok = True
                break
            sigma_prev = sigma
        best = max(best, sigma)
        converged = converged or ok
    return best, converged


def spectral_norm(mat: np.ndarray, tol: float = 1e-10) -> float:
    """||M||_2; warns (and returns the best estimate) on non-convergence."""
    sigma, ok = power_iteration(mat, tol=tol)
    if not ok:
        warnings.warn("power iteration did not converge; estimate is inexact",
                      RuntimeWarning)
    return sigma


# ---------------------------------------------------------------------------
# AUC maximization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AucDataset:
    """Synthetic imbalanced binary dataset.

    X: (n, d) features; y: labels in {+1, -1}; p_pos: empirical positive
    fraction; kappa_feat: max feature-row norm (bounds the box constraints).
    """

    X: np.ndarray
    y: np.ndarray
    p_pos: float
    kappa_feat: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def gen_auc_dataset(n: int, d: int, p_pos: float, noise_sigma: float,
                    seed) -> AucDataset:
    """Gaussian features, noisy linear scores, labels by score thresholding.

    Scores s = X w* + eps with unit-norm w*; the top p_pos fraction
    (strictly above the empirical (1 - p_pos)-quantile) is labeled +1.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    if not (0.0 < p_pos < 1.0):
        raise ValueError("p_pos must lie in (0, 1)")
    if p_pos * n < 1:
        raise ValueError("p_pos * n < 1: no positive sample would exist")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w_star = rng.standard_normal(d)
    w_star /= np.linalg.norm(w_star)
    scores = X @ w_star + noise_sigma * rng.standard_normal(n)
    threshold = np.quantile(scores, 1.0 - p_pos)
    y = np.where(scores > threshold, 1.0, -1.0)
    if not (y > 0).any() or not (y < 0).any():
        raise ValueError("degenerate labeling: one class is empty")
    p_emp = float((y > 0).mean())
    kappa = float(np.linalg.norm(X, axis=1).max())
    return AucDataset(X=X, y=y, p_pos=p_emp, kappa_feat=kappa)


@dataclass(frozen=True)
class AucProblem:
    """AUC saddle problem with both per-sample and assembled affine forms."""

    dataset: AucDataset
    Q: np.ndarray
    q: np.ndarray
    radius: float
    inclusion: InclusionProblem

    @property
    def dim(self) -> int:
        return self.dataset.d + 3


def build_auc_problem(dataset: AucDataset, radius: Optional[float] = None) -> AucProblem:
    """Assemble the AUC operator, its affine form, and the ball-box resolvent.

    The mean operator is G(z) = Q z + q with

        Q = 2 p (1-p) [[S+ + S-,  -mu+,  -mu-,  mu- - mu+],
                       [-mu+^T,     1,     0,       0    ],
                       [-mu-^T,     0,     1,       0    ],
                       [-(mu- - mu+)^T, 0, 0,       1    ]]

    built from the class means mu+/- and second-moment matrices S+/-, and
    q = 2 p (1-p) (mu- - mu+, 0, 0, 0).  The stepping Lipschitz constant is
    ||Q||_2.  The constraint set is {||w|| <= R} x [-R kappa, R kappa]^2 x
    [-2 R kappa, 2 R kappa]; R defaults to 100 (inactive in practice).
    """
    X, y = dataset.X, dataset.y
    n, d = X.shape
    pos = y > 0
    n_pos = int(pos.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be nonempty")
    p = n_pos / n
    Xp, Xm = X[pos], X[~pos]
    mu_p = Xp.mean(axis=0)
    mu_m = Xm.mean(axis=0)
    S_p = Xp.T @ Xp / n_pos
    S_m = Xm.T @ Xm / n_neg
    scale = 2.0 * p * (1.0 - p)

    dim = d + 3
    Q = np.zeros((dim, dim))
    Q[:d, :d] = S_p + S_m
    Q[:d, d] = -mu_p
    Q[:d, d + 1] = -mu_m
    Q[:d, d + 2] = mu_m - mu_p
    Q[d, :d] = -mu_p
    Q[d + 1, :d] = -mu_m
    Q[d + 2, :d] = -(mu_m - mu_p)
    Q[d, d] = Q[d + 1, d + 1] = Q[d + 2, d + 2] = 1.0
    Q *= scale
    q = np.zeros(dim)
    q[:d] = scale * (mu_m - mu_p)

    pos_all = pos

    def _slot_values(z, pos_i, s):
        """Per-sample row coefficients given labels and scores s = X w."""
        a, bb, al = z[d], z[d + 1], z[d + 2]
        cw = np.where(pos_i,
                      2.0 * (1 - p) * (s - a) - 2.0 * (1 + al) * (1 - p),
                      2.0 * p * (s - bb) + 2.0 * (1 + al) * p)
        ga = np.where(pos_i, -2.0 * (1 - p) * (s - a), 0.0)
        gb = np.where(pos_i, 0.0, -2.0 * p * (s - bb))
        gal = np.where(pos_i, 2.0 * (1 - p) * s, -2.0 * p * s) \
            + 2.0 * p * (1 - p) * al
        return cw, ga, gb, gal

    def batch_components(z, idx):
        Xi = X[idx]
        s = Xi @ z[:d]
        cw, ga, gb, gal = _slot_values(z, y[idx] > 0, s)
        out = np.empty((len(idx), dim))
        out[:, :d] = cw[:, None] * Xi
        out[:, d] = ga
        out[:, d + 1] = gb
        out[:, d + 2] = gal
        return out

    def batch_mean_fused(z, idx):
        m = len(idx)
        if m < n // 4:
            return batch_components(z, idx).mean(axis=0)
        # large batches: multiplicity weights + dense products instead of
        # row gathers
        counts = np.bincount(idx, minlength=n).astype(float)
        s = X @ z[:d]
        cw, ga, gb, gal = _slot_values(z, pos_all, s)
        out = np.empty(dim)
        out[:d] = X.T @ (counts * cw) / m
        out[d] = counts @ ga / m
        out[d + 1] = counts @ gb / m
        out[d + 2] = counts @ gal / m
        return out

    def full_eval(z):
        return Q @ z + q

    op = FiniteSumOperator(n=n, dim=dim, batch_components=batch_components,
                           batch_mean_fused=batch_mean_fused,
                           full_eval=full_eval)
    L = spectral_norm(Q, tol=1e-12)
    R = 100.0 if radius is None else float(radius)
    kappa = dataset.kappa_feat
    if np.isfinite(R):
        resolvent = ball_box_resolvent(
            R, [R * kappa, R * kappa, 2.0 * R * kappa])
    else:
        resolvent = identity_resolvent()
    inclusion = InclusionProblem(forward=op, resolvent=resolvent, lipschitz=L)
    return AucProblem(dataset=dataset, Q=Q, q=q, radius=R, inclusion=inclusion)


# ---------------------------------------------------------------------------
# Random MDP and policy evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mdp:
    """Tabular MDP with a fixed behavior policy.

    P: (S, A, S) transition probabilities; R: (S, A) rewards; pi: (S, A)
    policy; init: (S,) initial state distribution; gamma: discount.
    """

    P: np.ndarray
    R: np.ndarray
    pi: np.ndarray
    init: np.ndarray
    gamma: float

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]


_MDP_SMOOTHING = 1e-5


def gen_random_mdp(n_states: int, n_actions: int, seed,
                   gamma: float = 0.95) -> Mdp:
    """Random MDP: every probability row is U[0,1] + 1e-5, normalized.

    The policy and the initial distribution are generated the same way;
    rewards are U[0,1].
    """
    if n_states < 2 or n_actions < 1:
        raise ValueError("need n_states >= 2 and n_actions >= 1")
    rng = np.random.default_rng(seed)
    P = rng.uniform(size=(n_states, n_actions, n_states)) + _MDP_SMOOTHING
    P /= P.sum(axis=2, keepdims=True)
    pi = rng.uniform(size=(n_states, n_actions)) + _MDP_SMOOTHING
    pi /= pi.sum(axis=1, keepdims=True)
    init = rng.uniform(size=n_states) + _MDP_SMOOTHING
    init /= init.sum()
    R = rng.uniform(size=(n_states, n_actions))
    return Mdp(P=P, R=R, pi=pi, init=init, gamma=gamma)


def uniform_features(n_states: int, d: int, seed) -> np.ndarray:
    """Per-state features: d-1 coordinates U[0,1] plus a constant-1 bias."""
    if d < 2:
        raise ValueError("need d >= 2 (one slot is the bias)")
    rng = np.random.default_rng(seed)
    F = np.empty((n_states, d))
    F[:, : d - 1] = rng.uniform(size=(n_states, d - 1))
    F[:, d - 1] = 1.0
    return F


@dataclass(frozen=True)
class Transitions:
    """One simulated trajectory in feature space: (phi_t, phi_{t+1}, r_t)."""

    phi: np.ndarray       # (n, d)
    phi_next: np.ndarray  # (n, d)
    r: np.ndarray         # (n,)

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def d(self) -> int:
        return self.phi.shape[1]


def sample_transitions(mdp: Mdp, n: int,
                       feature_map: Union[np.ndarray, Callable[[int], np.ndarray]],
                       seed) -> Transitions:
    """Simulate one n-step trajectory from the initial distribution.

    feature_map is either an (S, d) matrix or a callable state -> R^d.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if callable(feature_map):
        F = np.stack([np.asarray(feature_map(s), dtype=float)
                      for s in range(mdp.n_states)])
    else:
        F = np.asarray(feature_map, dtype=float)
    rng = np.random.default_rng(seed)
    cum_init = np.cumsum(mdp.init)
    cum_pi = np.cumsum(mdp.pi, axis=1)
    cum_P = np.cumsum(mdp.P, axis=2)

    states = np.empty(n + 1, dtype=int)
    rewards = np.empty(n)
    s = int(np.searchsorted(cum_init, rng.random()))
    states[0] = s
    for t in range(n):
        a = int(np.searchsorted(cum_pi[s], rng.random()))
        rewards[t] = mdp.R[s, a]
        s = int(np.searchsorted(cum_P[states[t], a], rng.random()))
        states[t + 1] = s
    return Transitions(phi=F[states[:-1]], phi_next=F[states[1:]], r=rewards)


@dataclass(frozen=True)
class PeProblem:
    """Policy-evaluation saddle problem in the variable x = (theta, w)."""

    transitions: Transitions
    gamma: float
    tau_reg: float
    G_mat: np.ndarray   # (2d, 2d) assembled affine map
    g_vec: np.ndarray   # (2d,) offset
    inclusion: InclusionProblem

    @property
    def d(self) -> int:
        return self.transitions.d


def build_pe_problem(transitions: Transitions, gamma: float,
                     tau_reg: float) -> PeProblem:
    """Per-transition operators G_t(x) = (-A_t^T w, A_t theta + C_t w - b_t)
    with A_t = phi_t (phi_t - gamma phi_t')^T, b_t = r_t phi_t,
    C_t = phi_t phi_t^T, applied as rank-one products (no d x d matrices per
    sample).  The l1 regularizer on theta yields a soft-threshold resolvent
    with weight tau_reg (shrinkage eta * tau_reg at step size eta).
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if tau_reg < 0:
        raise ValueError("tau_reg must be nonnegative")
    phi, phi2, r = transitions.phi, transitions.phi_next, transitions.r
    n, d = phi.shape
    psi = phi - gamma * phi2
    A_hat = phi.T @ psi / n
    C_hat = phi.T @ phi / n
    b_hat = phi.T @ r / n

    dim = 2 * d
    G_mat = np.zeros((dim, dim))
    G_mat[:d, d:] = -A_hat.T
    G_mat[d:, :d] = A_hat
    G_mat[d:, d:] = C_hat
    g_vec = np.zeros(dim)
    g_vec[d:] = -b_hat

    def batch_components(x, idx):
        theta, w = x[:d], x[d:]
        ph = phi[idx]
        ps = psi[idx]
        s_pw = ph @ w          # phi_t . w
        s_pt = ps @ theta      # psi_t . theta
        out = np.empty((len(idx), dim))
        out[:, :d] = -ps * s_pw[:, None]
        out[:, d:] = ph * (s_pt + s_pw - r[idx])[:, None]
        return out

    def batch_mean_fused(x, idx):
        m = len(idx)
        if m < n // 4:
            return batch_components(x, idx).mean(axis=0)
        theta, w = x[:d], x[d:]
        counts = np.bincount(idx, minlength=n).astype(float)
        s_pw = phi @ w
        s_pt = psi @ theta
        out = np.empty(dim)
        out[:d] = -(psi.T @ (counts * s_pw)) / m
        out[d:] = (phi.T @ (counts * (s_pt + s_pw - r))) / m
        return out

    def full_eval(x):
        return G_mat @ x + g_vec

    op = FiniteSumOperator(n=n, dim=dim, batch_components=batch_components,
                           batch_mean_fused=batch_mean_fused,
                           full_eval=full_eval)
    L = spectral_norm(G_mat, tol=1e-12)
    resolvent = soft_threshold_resolvent(tau_reg, d) if tau_reg > 0 \
        else identity_resolvent()
    inclusion = InclusionProblem(forward=op, resolvent=resolvent, lipschitz=L)
    return PeProblem(transitions=transitions, gamma=gamma, tau_reg=tau_reg,
                     G_mat=G_mat, g_vec=g_vec, inclusion=inclusion)


# ---------------------------------------------------------------------------
# Synthetic affine problems
# ---------------------------------------------------------------------------

def affine_problem_from_components(B: np.ndarray, c: np.ndarray,
                                   resolvent: Optional[Resolvent] = None,
                                   rho: float = 0.0) -> InclusionProblem:
    """Finite sum of dense affine components G_i(x) = B_i x + c_i.

    The average-Lipschitz constant is computed exactly from
    lambda_max((1/n) sum_i B_i^T B_i).  Intended for small test problems.
    """
    B = np.asarray(B, dtype=float)
    c = np.asarray(c, dtype=float)
    n, dim = c.shape
    B_mean = B.mean(axis=0)
    c_mean = c.mean(axis=0)
    gram = np.einsum("kji,kjl->il", B, B) / n
    L = math.sqrt(max(float(np.linalg.eigvalsh(gram).max()), 0.0))

    def batch_components(x, idx):
        return B[idx] @ x + c[idx]

    def full_eval(x):
        return B_mean @ x + c_mean

    op = FiniteSumOperator(n=n, dim=dim, batch_components=batch_components,
                           full_eval=full_eval, lipschitz=L)
    solution = None
    try:
        solution = np.linalg.solve(B_mean, -c_mean)
    except np.linalg.LinAlgError:
        pass
    if resolvent is not None and resolvent.kind != "identity":
        solution = None  # fixed point of the mean map is no longer a root
    return InclusionProblem(forward=op,
                            resolvent=resolvent or identity_resolvent(),
                            lipschitz=L, weak_minty_rho=rho,
                            known_solution=solution)


def linear_toy(n: int = 10, dim: int = 4, seed=0,
               spread: float = 0.5) -> InclusionProblem:
    """Small random affine finite sum around the identity; the workhorse of
    the Monte-Carlo verification suite."""
    rng = np.random.default_rng(np.random.SeedSequence([0x70F, seed]))
    B = np.stack([np.eye(dim) + spread * rng.standard_normal((dim, dim)) / math.sqrt(dim)
                  for _ in range(n)])
    c = rng.standard_normal((n, dim))
    return affine_problem_from_components(B, c)


def bilinear_problem(d_half: int = 1) -> InclusionProblem:
    """G(u, v) = (v, -u): the rotation field, monotone with L = 1."""
    dim = 2 * d_half
    B = np.zeros((1, dim, dim))
    B[0, :d_half, d_half:] = np.eye(d_half)
    B[0, d_half:, :d_half] = -np.eye(d_half)
    c = np.zeros((1, dim))
    return affine_problem_from_components(B, c)


def strongly_monotone_affine(dim: int, n_components: int, seed,
                             mu: float = 1.0, slope_scale: float = 0.1,
                             offset_scale: float = 1.0) -> InclusionProblem:
    """Random strongly monotone affine finite sum with cheap batch access.

    Components are G_i(x) = (mu I + u_i u_i^T) x + c_i with small random
    rank-one slopes, so the symmetric part of the mean Jacobian dominates
    mu I.  Batch means cost O(|batch| d) and the exact mean is a cached
    matrix (full evaluations still charge n).  The average-Lipschitz
    constant and the solution of the mean system are computed exactly.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0x57A6, seed]))
    n, d = int(n_components), int(dim)
    U = (slope_scale / math.sqrt(d)) * rng.standard_normal((n, d))
    c = offset_scale * rng.standard_normal((n, d))
    c_mean = c.mean(axis=0)
    M_mean = mu * np.eye(d) + U.T @ U / n
    # exact average-Lipschitz: (1/n) sum_i B_i^T B_i with B_i = mu I + u_i u_i^T
    row_sq = np.einsum("ij,ij->i", U, U)
    gram = mu * mu * np.eye(d) + (2.0 * mu) * (U.T @ U) / n \
        + (U * row_sq[:, None]).T @ U / n
    L = math.sqrt(float(np.linalg.eigvalsh(gram).max()))
    solution = np.linalg.solve(M_mean, -c_mean)

    def batch_components(x, idx):
        Ui = U[idx]
        s = Ui @ x
        return (mu * x)[None, :] + s[:, None] * Ui + c[idx]

    def batch_mean_fused(x, idx):
        m = len(idx)
        if m >= n // 4:
            # large batches: multiplicity-weighted dense products beat
            # row gathers (sequential instead of random memory access)
            counts = np.bincount(idx, minlength=n).astype(float)
            weights = counts * (U @ x)
            return mu * x + (U.T @ weights) / m + (counts @ c) / m
        Ui = U[idx]
        s = Ui @ x
        return mu * x + (Ui.T @ s) / m + c[idx].mean(axis=0)

    def full_eval(x):
        return M_mean @ x + c_mean

    op = FiniteSumOperator(n=n, dim=d, batch_components=batch_components,
                           batch_mean_fused=batch_mean_fused,
                           full_eval=full_eval, lipschitz=L)
    return InclusionProblem(forward=op, resolvent=identity_resolvent(),
                            lipschitz=L, known_solution=solution)


# ---------------------------------------------------------------------------
# Columnar text export (exact decimal round-trip at 17 significant digits)
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_auc_dataset(dataset: AucDataset, path) -> None:
    """One sample per line: d feature floats then the label."""
    with open(path, "w", newline="\n") as fh:
        for row, label in zip(dataset.X, dataset.y):
            fh.write(" ".join(_fmt(v) for v in row))
            fh.write(f" {_fmt(label)}\n")


def load_auc_dataset(path) -> AucDataset:
    data = np.loadtxt(path, ndmin=2)
    X, y = data[:, :-1], data[:, -1]
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    return AucDataset(X=X, y=y, p_pos=float((y > 0).mean()),
                      kappa_feat=float(np.linalg.norm(X, axis=1).max()))


def save_transitions(transitions: Transitions, path) -> None:
    """One transition per line: phi (d floats), phi' (d floats), reward."""
    with open(path, "w", newline="\n") as fh:
        for ph, ph2, rw in zip(transitions.phi, transitions.phi_next,
                               transitions.r):
            parts = [_fmt(v) for v in ph] + [_fmt(v) for v in ph2] + [_fmt(rw)]
            fh.write(" ".join(parts) + "\n")


def load_transitions(path) -> Transitions:
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] % 2 != 1:
        raise ValueError("expected 2d+1 columns (phi, phi', reward)")
    d = (data.shape[1] - 1) // 2
    return Transitions(phi=data[:, :d], phi_next=data[:, d:2 * d],
                       r=data[:, 2 * d])
