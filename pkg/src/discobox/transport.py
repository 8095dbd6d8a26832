"""Entropic optimal transport via Sinkhorn scaling, plus marginal
construction from mask probabilities.

The solver minimizes <T, C> subject to fixed row/column marginals,
softened by an entropy term of strength `epsilon`. The target marginal
is rescaled to the source's total mass before solving, since the
step-function marginals are unnormalized and generally unbalanced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DimMismatch, NonFiniteCost, NumericalUnderflow


def step_marginal(mask: np.ndarray) -> np.ndarray:
    """Per-pixel importance weights: 1.0 where mask > 0.5, else 0.6."""
    mask = np.asarray(mask, dtype=np.float64)
    return np.where(mask > 0.5, 1.0, 0.6).ravel()


@dataclass
class TransportPlan:
    values: np.ndarray  # (rows, cols), nonnegative
    mu_a: np.ndarray
    mu_b: np.ndarray  # after mass balancing
    epsilon: float
    iterations_run: int
    converged: bool

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def marginal_violation(self) -> float:
        r = np.abs(self.values.sum(axis=1) - self.mu_a).max()
        c = np.abs(self.values.sum(axis=0) - self.mu_b).max()
        return float(max(r, c))


def _sinkhorn_scaling(cost, mu_a, mu_b, epsilon, t_max, tol):
    """Plain scaling-form iterations. Returns None on underflow."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _sinkhorn_scaling_impl(cost, mu_a, mu_b, epsilon, t_max, tol)


def _sinkhorn_scaling_impl(cost, mu_a, mu_b, epsilon, t_max, tol):
    K = np.exp(-cost / epsilon)
    # any flushed-to-zero entry silently forbids that edge and skews the
    # fixed point, so hand such problems to the log-domain form instead
    if not np.all(K > 0.0):
        return None
    b = np.ones_like(mu_b)
    a = np.ones_like(mu_a)
    converged = False
    it = 0
    while it < t_max:
        Kb = K @ b
        if not np.all(Kb > 0.0):
            return None
        a = mu_a / Kb
        Ka = K.T @ a
        if not np.all(Ka > 0.0):
            return None
        b = mu_b / Ka
        it += 1
        # columns are exact after the b update; check rows
        row_violation = np.abs(a * (K @ b) - mu_a).max()
        if row_violation < tol:
            converged = True
            break
    T = a[:, None] * K * b[None, :]
    if not np.all(np.isfinite(T)):
        return None
    return T, it, converged


def _sinkhorn_log(cost, mu_a, mu_b, epsilon, t_max, tol):
    """Log-domain stabilized iterations (same fixed point)."""
    log_mu_a = np.log(mu_a)
    log_mu_b = np.log(mu_b)
    f = np.zeros_like(mu_a)
    g = np.zeros_like(mu_b)
    mC = -cost / epsilon
    converged = False
    it = 0
    while it < t_max:
        f = epsilon * (log_mu_a - logsumexp(mC + g[None, :] / epsilon, axis=1))
        g = epsilon * (log_mu_b - logsumexp(mC + f[:, None] / epsilon, axis=0))
        it += 1
        row_sums = np.exp(
            logsumexp(mC + f[:, None] / epsilon + g[None, :] / epsilon, axis=1)
        )
        if np.abs(row_sums - mu_a).max() < tol:
            converged = True
            break
    T = np.exp(mC + f[:, None] / epsilon + g[None, :] / epsilon)
    return T, it, converged


def sinkhorn(
    cost: np.ndarray,
    mu_a: np.ndarray,
    mu_b: np.ndarray,
    epsilon: float = 0.05,
    t_max: int = 1000,
    tol: float = 1e-6,
) -> TransportPlan:
    """Solve min <T, C> over couplings of (mu_a, rescaled mu_b).

    Runs the plain scaling iteration and falls back to the log-domain
    form when the kernel underflows (epsilon small for the cost scale).
    """
    cost = np.asarray(cost, dtype=np.float64)
    mu_a = np.asarray(mu_a, dtype=np.float64).ravel()
    mu_b = np.asarray(mu_b, dtype=np.float64).ravel()
    if cost.shape != (mu_a.size, mu_b.size):
        raise DimMismatch(f"cost {cost.shape} vs marginals {mu_a.size}x{mu_b.size}")
    if not np.all(np.isfinite(cost)):
        raise NonFiniteCost("cost matrix contains non-finite values")
    if epsilon <= 0:
        raise NonFiniteCost(f"epsilon must be positive, got {epsilon}")
    if np.any(mu_a <= 0) or np.any(mu_b <= 0):
        raise NonFiniteCost("marginals must be strictly positive")

    # balance total mass onto the source side
    mu_b = mu_b * (mu_a.sum() / mu_b.sum())

    # a constant cost shift is absorbed by the scaling vectors; shifting
    # to min 0 keeps exp(-C/eps) inside the representable range
    cost = cost - cost.min()

    result = _sinkhorn_scaling(cost, mu_a, mu_b, epsilon, t_max, tol)
    if result is None:
        result = _sinkhorn_log(cost, mu_a, mu_b, epsilon, t_max, tol)
    T, it, converged = result
    if not np.all(np.isfinite(T)) or np.any(T.sum(axis=1) == 0.0) or np.any(
        T.sum(axis=0) == 0.0
    ):
        raise NumericalUnderflow(
            f"transport kernel collapsed (epsilon={epsilon} too small for cost scale)"
        )
    return TransportPlan(T, mu_a, mu_b, float(epsilon), it, converged)


def transport_cost(plan: TransportPlan, cost: np.ndarray) -> float:
    """Frobenius inner product <T, C>."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.shape != plan.values.shape:
        raise DimMismatch(f"cost {cost.shape} vs plan {plan.values.shape}")
    return float(np.sum(plan.values * cost))
