"""Cost-volume construction and the iterated-conditional-mode matcher.

The appearance volume is all-pairs cosine similarity between two RoIs'
per-pixel feature vectors. The geometric term rewards pairs whose
spatial displacement agrees with the mass-weighted displacement
distribution of the current transport plan; it is computed exactly on
the integer lattice as a displacement histogram followed by a Gaussian
convolution, instead of the quartic naive sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import convolve2d

from . import transport
from .errors import ChannelMismatch, NonPositiveGamma
from .transport import TransportPlan, sinkhorn

KERNEL_TAIL = 1e-6


@dataclass
class CostVolume:
    values: np.ndarray  # (hw_a, hw_b)
    kind: str  # appearance | geometric | combined
    shape_a: tuple[int, int]
    shape_b: tuple[int, int]

    @property
    def hw_a(self) -> int:
        return self.values.shape[0]

    @property
    def hw_b(self) -> int:
        return self.values.shape[1]


@dataclass
class SinkhornConfig:
    epsilon: float = 0.05
    t_max: int = 1000
    tol: float = 1e-6


@dataclass
class MatchResult:
    plan: TransportPlan
    combined_cost: CostVolume
    appearance: CostVolume
    argmax_targets: np.ndarray  # per source pixel, lowest index on ties
    iterations: int


def cost_volume_u(f_a: np.ndarray, f_b: np.ndarray) -> CostVolume:
    """All-pairs cosine similarity between (C, H, W) feature grids.

    Zero-norm feature vectors get similarity 0.
    """
    f_a = np.asarray(f_a, dtype=np.float64)
    f_b = np.asarray(f_b, dtype=np.float64)
    if f_a.shape[0] != f_b.shape[0]:
        raise ChannelMismatch(f"{f_a.shape[0]} vs {f_b.shape[0]} channels")
    shape_a = f_a.shape[1:]
    shape_b = f_b.shape[1:]
    va = f_a.reshape(f_a.shape[0], -1).T  # (HW_a, C)
    vb = f_b.reshape(f_b.shape[0], -1).T
    na = np.linalg.norm(va, axis=1)
    nb = np.linalg.norm(vb, axis=1)
    sim = va @ vb.T
    denom = na[:, None] * nb[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(denom > 0.0, sim / np.where(denom > 0.0, denom, 1.0), 0.0)
    sim = np.clip(sim, -1.0, 1.0)
    return CostVolume(sim, "appearance", shape_a, shape_b)


@lru_cache(maxsize=32)
def _displacement_bins(h_a: int, w_a: int, h_b: int, w_b: int):
    """Flat bin index of the displacement of every (source, target) pair."""
    ya, xa = np.divmod(np.arange(h_a * w_a), w_a)
    yb, xb = np.divmod(np.arange(h_b * w_b), w_b)
    dy = yb[None, :] - ya[:, None] + (h_a - 1)
    dx = xb[None, :] - xa[:, None] + (w_a - 1)
    n_dx = w_a + w_b - 1
    bins = dy * n_dx + dx
    n_bins = (h_a + h_b - 1) * n_dx
    return bins, (h_a + h_b - 1, n_dx), n_bins


def gaussian_offset_kernel(gamma: float) -> np.ndarray:
    """Unnormalized Gaussian exp(-|d|^2 / (2*gamma)), truncated where the
    tail drops below 1e-6."""
    radius = math.ceil(math.sqrt(2.0 * gamma * math.log(1.0 / KERNEL_TAIL)))
    d = np.arange(-radius, radius + 1)
    sq = d[:, None] ** 2 + d[None, :] ** 2
    return np.exp(-sq / (2.0 * gamma))


def geometric_consistency(
    plan: TransportPlan,
    gamma: float,
    shape_a: tuple[int, int] | None = None,
    shape_b: tuple[int, int] | None = None,
) -> CostVolume:
    """Displacement-smoothness reward for every pixel pair.

    Equals the naive sum over all (j, l) of
    exp(-|off_ik - off_jl|^2 / (2*gamma)) * T(j, l), computed via a
    displacement histogram and one 2D convolution.
    """
    if gamma <= 0:
        raise NonPositiveGamma(f"gamma must be positive, got {gamma}")
    if shape_a is None:
        side = math.isqrt(plan.rows)
        if side * side != plan.rows:
            raise ChannelMismatch("non-square plan requires explicit shapes")
        shape_a = (side, side)
    if shape_b is None:
        side = math.isqrt(plan.cols)
        if side * side != plan.cols:
            raise ChannelMismatch("non-square plan requires explicit shapes")
        shape_b = (side, side)

    bins, hist_shape, n_bins = _displacement_bins(*shape_a, *shape_b)
    hist = np.bincount(bins.ravel(), weights=plan.values.ravel(), minlength=n_bins)
    hist = hist.reshape(hist_shape)
    kernel = gaussian_offset_kernel(gamma)
    smoothed = convolve2d(hist, kernel, mode="same")
    cg = smoothed.ravel()[bins]
    return CostVolume(np.maximum(cg, 0.0), "geometric", shape_a, shape_b)


def icm_match(
    f_a: np.ndarray,
    f_b: np.ndarray,
    mu_a: np.ndarray,
    mu_b: np.ndarray,
    icm_iters: int = 2,
    sinkhorn_cfg: SinkhornConfig | None = None,
    gamma: float = 14.0,
) -> MatchResult:
    """Alternately solve transport and refresh the geometric term.

    Runs icm_iters + 1 Sinkhorn solves: the first on the appearance
    volume alone, each later one on appearance + geometric consistency
    of the previous plan. The solver minimizes cost, so the (negated)
    similarity volume is passed as the cost. The geometric term is
    scaled by the plan's total mass when combined, keeping it on the
    cosine scale regardless of RoI size.
    """
    cfg = sinkhorn_cfg or SinkhornConfig()
    cu = cost_volume_u(f_a, f_b)
    combined = cu
    plan = None
    for t in range(icm_iters + 1):
        plan = sinkhorn(-combined.values, mu_a, mu_b, cfg.epsilon, cfg.t_max, cfg.tol)
        if t < icm_iters:
            cg = geometric_consistency(plan, gamma, cu.shape_a, cu.shape_b)
            mass = plan.values.sum()
            combined = CostVolume(
                cu.values + cg.values / mass, "combined", cu.shape_a, cu.shape_b
            )
    targets = np.argmax(plan.values, axis=1)  # lowest index on ties
    return MatchResult(plan, combined, cu, targets, icm_iters + 1)
