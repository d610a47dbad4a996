"""Composite-inclusion problems: forward operators, resolvents, residuals.

The target problem is to find x with 0 in G(x) + T(x), where G is a
single-valued operator available either as a finite sum (1/n) sum_i G_i(x)
or through a sampling oracle E_xi[G(x, xi)], and T is a possibly multivalued
operator accessed only through its resolvent J(z) = (I + eta*T)^{-1}(z).

Operators and resolvents are immutable after construction and safe to share
between concurrent runs; evaluation counters are owned by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np


class UnsupportedConfigError(ValueError):
    """An estimator/problem combination that cannot work (e.g. SAGA on a
    pure sampling oracle, which has no component table to maintain)."""


class InfeasibleParametersError(ValueError):
    """Step-size feasibility violated (the weak-Minty radius is too large
    relative to the Lipschitz constant)."""


@dataclass
class CallCounter:
    """Counts component/oracle evaluations.  One counter per run."""

    count: int = 0

    def add(self, k: int) -> None:
        self.count += int(k)


def _charge(counter: Optional[CallCounter], k: int) -> None:
    if counter is not None:
        counter.add(k)


# ---------------------------------------------------------------------------
# Forward operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteSumOperator:
    """G(x) = (1/n) sum_i G_i(x) with vectorized component access.

    Args:
        n: number of components.
        dim: dimension of the variable (and of every component value).
        batch_components: (x, idx) -> (len(idx), dim) array of G_i(x) for
            i in idx (duplicates allowed, order preserved).
        batch_mean_fused: optional (x, idx) -> (dim,) computing the mean of
            the batch without materializing per-component rows.
        full_eval: optional closed form for the exact mean (affine fast
            path).  Epoch accounting still charges n per full evaluation.
        lipschitz: optional bound L with
            (1/n) sum_i ||G_i x - G_i y||^2 <= L^2 ||x - y||^2.
    """

    n: int
    dim: int
    batch_components: Callable[[np.ndarray, np.ndarray], np.ndarray]
    batch_mean_fused: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    full_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz: Optional[float] = None

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """I.i.d. uniform component indices, sampled with replacement."""
        return rng.integers(0, self.n, size=size)

    def batch_mean(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        if self.batch_mean_fused is not None:
            return self.batch_mean_fused(x, idx)
        return self.batch_components(x, idx).mean(axis=0)

    def full(self, x: np.ndarray) -> np.ndarray:
        if self.full_eval is not None:
            return self.full_eval(x)
        return self.batch_mean(x, np.arange(self.n))


@dataclass(frozen=True)
class StochasticOracle:
    """G(x) = E_xi[G(x, xi)] accessed through seed-driven samples.

    The evaluator must be deterministic given (x, xi); all randomness lives
    in the sampler.  `exact_mean`, when available (synthetic problems),
    gives the true mean for diagnostics such as residual evaluation.
    """

    dim: int
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]  # (x, xi_batch) -> (m, dim)
    variance_bound: float = 0.0
    lipschitz: Optional[float] = None
    exact_mean: Optional[Callable[[np.ndarray], np.ndarray]] = None

    n = None  # no component table

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sampler(rng, size)

    def batch_components(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return self.evaluator(x, xi)

    def batch_mean(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return self.evaluator(x, xi).mean(axis=0)

    def full(self, x: np.ndarray) -> np.ndarray:
        if self.exact_mean is None:
            raise UnsupportedConfigError(
                "exact mean evaluation is not available for this oracle")
        return self.exact_mean(x)


ForwardOperator = Union[FiniteSumOperator, StochasticOracle]


def eval_full(op: ForwardOperator, x: np.ndarray,
              counter: Optional[CallCounter] = None,
              charge: bool = True) -> np.ndarray:
    """Exact mean (1/n) sum_i G_i(x).

    Charges n component evaluations unless `charge` is False (free mode for
    closed-form diagnostics).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (op.dim,):
        raise ValueError(f"dimension mismatch: expected ({op.dim},), got {x.shape}")
    value = op.full(x)
    if charge and getattr(op, "n", None) is not None:
        _charge(counter, op.n)
    return value


def eval_batch(op: ForwardOperator, batch: np.ndarray, x: np.ndarray,
               counter: Optional[CallCounter] = None) -> np.ndarray:
    """Mini-batch mean (1/|batch|) sum_{i in batch} G_i(x); duplicates count.

    Charges |batch| component evaluations.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (op.dim,):
        raise ValueError(f"dimension mismatch: expected ({op.dim},), got {x.shape}")
    batch = np.asarray(batch)
    if batch.size == 0:
        raise ValueError("batch must be nonempty")
    if getattr(op, "n", None) is not None:
        if batch.min() < 0 or batch.max() >= op.n:
            raise ValueError("batch index out of range")
    _charge(counter, len(batch))
    return op.batch_mean(x, batch)


# ---------------------------------------------------------------------------
# Resolvents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Resolvent:
    """Resolvent J(z) = (I + eta*T)^{-1}(z) for the supported T kinds.

    kind is one of:
        "identity"       T = 0, J(z) = z.
        "ball-box"       projection onto {||w|| <= radius} x box, where the
                         box clamps the trailing len(box_bounds) coordinates
                         to [-box_bounds[j], box_bounds[j]].
        "soft-threshold" componentwise shrinkage by eta*weight on the first
                         theta_dim coordinates, identity elsewhere.
        "custom"         user-supplied func(z, eta).

    All built-in kinds are nonexpansive projections/proximal maps.
    """

    kind: str
    radius: float = np.inf
    box_bounds: Optional[np.ndarray] = None
    weight: float = 0.0
    theta_dim: int = 0
    func: Optional[Callable[[np.ndarray, float], np.ndarray]] = None


def identity_resolvent() -> Resolvent:
    return Resolvent(kind="identity")


def ball_box_resolvent(radius: float, box_bounds) -> Resolvent:
    bounds = np.asarray(box_bounds, dtype=float)
    if np.any(bounds <= 0):
        raise ValueError("box bounds must be positive")
    if not (radius > 0):
        raise ValueError("ball radius must be positive")
    return Resolvent(kind="ball-box", radius=float(radius), box_bounds=bounds)


def soft_threshold_resolvent(weight: float, theta_dim: int) -> Resolvent:
    if weight < 0:
        raise ValueError("soft-threshold weight must be nonnegative")
    return Resolvent(kind="soft-threshold", weight=float(weight),
                     theta_dim=int(theta_dim))


def custom_resolvent(func) -> Resolvent:
    return Resolvent(kind="custom", func=func)


def apply_resolvent(res: Resolvent, z: np.ndarray, eta: float = 1.0) -> np.ndarray:
    """Evaluate J(z) = (I + eta*T)^{-1}(z).

    eta only matters for proximal kinds (soft-threshold shrinks by
    eta*weight); projections ignore it.
    """
    z = np.asarray(z, dtype=float)
    if res.kind == "identity":
        return z.copy()
    if res.kind == "ball-box":
        out = z.copy()
        nb = len(res.box_bounds)
        head = out[: z.size - nb]
        if np.isfinite(res.radius):
            nrm = float(np.linalg.norm(head))
            if nrm > res.radius:
                head *= res.radius / nrm
        tail = out[z.size - nb:]
        np.clip(tail, -res.box_bounds, res.box_bounds, out=tail)
        return out
    if res.kind == "soft-threshold":
        out = z.copy()
        lam = eta * res.weight
        if lam > 0:
            th = out[: res.theta_dim]
            out[: res.theta_dim] = np.sign(th) * np.maximum(np.abs(th) - lam, 0.0)
        return out
    if res.kind == "custom":
        return np.asarray(res.func(z, eta), dtype=float)
    raise ValueError(f"unknown resolvent kind {res.kind!r}")


# ---------------------------------------------------------------------------
# Problem bundle and the forward-backward residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InclusionProblem:
    """Bundles a forward operator, a resolvent for T, and the constants that
    the solver needs (stepping Lipschitz constant, weak-Minty radius)."""

    forward: ForwardOperator
    resolvent: Resolvent
    lipschitz: float
    weak_minty_rho: float = 0.0
    known_solution: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.forward.dim

    @property
    def is_finite_sum(self) -> bool:
        return getattr(self.forward, "n", None) is not None

    @property
    def n_components(self) -> int:
        if not self.is_finite_sum:
            raise UnsupportedConfigError("operator is not a finite sum")
        return self.forward.n


def fb_residual(problem: InclusionProblem, eta: float, x: np.ndarray,
                counter: Optional[CallCounter] = None,
                metered: bool = False):
    """Forward-backward residual r = (x - J(x - eta*G(x))) / eta.

    x solves the inclusion iff r = 0, which makes ||r|| the convergence
    certificate reported by all runs.  Uses the exact full-batch G; by
    default this diagnostic is unmetered (charge with metered=True).

    Returns:
        (r, ||r||)
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    x = np.asarray(x, dtype=float)
    gx = eval_full(problem.forward, x, counter=counter if metered else None,
                   charge=metered)
    r = (x - apply_resolvent(problem.resolvent, x - eta * gx, eta)) / eta
    return r, float(np.linalg.norm(r))
