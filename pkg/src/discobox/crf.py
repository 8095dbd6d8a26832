"""Pairwise kernel construction, Gibbs-energy evaluation, and mean-field
inference with cross-image potentials.

The energy over a binary labeling x of one RoI is

    E(x) = sum_i psi(x_i)                                (unary)
         + sum_{8-neighbor pairs} k(i,j) [x_i != x_j]    (pairwise)
         + sum_links w2 sum_{i,k} T(i,k) C(i,k) [x_i != x_k]

with psi(1) = -log(phi(m_i)), psi(0) = -log(1 - phi(m_i)) and the
contrast-sensitive kernel k(i,j) = w1 exp(-|I_i - I_j|^2 / (2 zeta^2)).

Two inference modes are provided: `literal` follows the published
update sequence line for line on a scalar belief; `two_channel`
(default) is standard Potts mean-field over {background, foreground}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, NonFiniteBelief, NonPositiveZeta, OutOfRange
from .correspondence import CostVolume
from .transport import TransportPlan

# 8-connected neighborhood offsets (dy, dx)
_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
# one offset per unordered pair
_HALF_OFFSETS = [(0, 1), (1, -1), (1, 0), (1, 1)]


def threshold_phi(x):
    """0.3 for x <= 0.5, 0.7 otherwise. Accepts scalars or arrays in [0,1]."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise OutOfRange(f"input outside [0,1]: range [{arr.min()}, {arr.max()}]")
    out = np.where(arr <= 0.5, 0.3, 0.7)
    return float(out) if np.isscalar(x) else out


@dataclass
class PairwiseKernel:
    """Contrast-sensitive weights on the 8-connected neighborhood.

    weights[offset] is an (H, W) map of k(i, i+offset), zero where the
    neighbor falls outside the grid.
    """

    height: int
    width: int
    w1: float
    weights: dict[tuple[int, int], np.ndarray]

    def apply(self, q: np.ndarray) -> np.ndarray:
        """Per-pixel sum over neighbors j of k(i,j) * q_j."""
        out = np.zeros((self.height, self.width))
        for (dy, dx), w in self.weights.items():
            shifted = np.zeros_like(out)
            ys = slice(max(0, -dy), self.height - max(0, dy))
            yd = slice(max(0, dy), self.height - max(0, -dy))
            xs = slice(max(0, -dx), self.width - max(0, dx))
            xd = slice(max(0, dx), self.width - max(0, -dx))
            shifted[ys, xs] = q[yd, xd]
            out += w * shifted
        return out


def build_kernel(rgb_crop: np.ndarray, w1: float, zeta: float) -> PairwiseKernel:
    """Kernel weights w1 * exp(-|I_i - I_j|^2 / (2 zeta^2)) for the
    8-neighborhood of a (3, H, W) crop."""
    if zeta <= 0:
        raise NonPositiveZeta(f"zeta must be positive, got {zeta}")
    rgb = np.asarray(rgb_crop, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise DimMismatch(f"expected (3, H, W) crop, got {rgb.shape}")
    _, h, w = rgb.shape
    weights = {}
    for dy, dx in _OFFSETS:
        wmap = np.zeros((h, w))
        ys = slice(max(0, -dy), h - max(0, dy))
        yd = slice(max(0, dy), h - max(0, -dy))
        xs = slice(max(0, -dx), w - max(0, dx))
        xd = slice(max(0, dx), w - max(0, -dx))
        diff = rgb[:, ys, xs] - rgb[:, yd, xd]
        wmap[ys, xs] = w1 * np.exp(-np.sum(diff * diff, axis=0) / (2.0 * zeta * zeta))
        weights[(dy, dx)] = wmap
    return PairwiseKernel(h, w, w1, weights)


@dataclass
class CrossLink:
    """Read-only view of one matched neighbor: its transport plan,
    combined cost volume, binary labeling and the cross-image weight."""

    plan: TransportPlan
    cost: CostVolume
    neighbor_labeling: np.ndarray  # (H, W) in {0, 1}
    weight: float


@dataclass
class MeanFieldState:
    q_fg: np.ndarray  # per-pixel foreground belief
    iteration: int
    converged: bool


@dataclass
class TeacherConfig:
    w1: float = 1.0
    w2: float = 0.5
    zeta: float = 13.0
    gamma: float = 14.0
    mf_iters: int = 10
    mf_tol: float = 1e-4
    mode: str = "two_channel"  # or "literal"


def _unary_maps(mask: np.ndarray):
    phi = threshold_phi(np.asarray(mask, dtype=np.float64))
    return -np.log(phi), -np.log(1.0 - phi)  # (fg, bg)


def _link_messages(link: CrossLink, h: int, w: int):
    """Per-pixel cross-image message toward fg / bg from one link."""
    tc = link.plan.values * link.cost.values  # (HW, HW)
    xs = np.asarray(link.neighbor_labeling, dtype=np.float64).ravel()
    to_bg = link.weight * (tc @ xs)          # penalty for x_i = 0 vs x_k = 1
    to_fg = link.weight * (tc @ (1.0 - xs))  # penalty for x_i = 1 vs x_k = 0
    return to_fg.reshape(h, w), to_bg.reshape(h, w)


def gibbs_energy(
    x: np.ndarray,
    mask: np.ndarray,
    kernel: PairwiseKernel,
    cross_links: list[CrossLink] = (),
) -> float:
    """Evaluate the full energy of a binary labeling."""
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if x.shape != mask.shape or x.shape != (kernel.height, kernel.width):
        raise DimMismatch(f"labeling {x.shape} vs mask {mask.shape}")
    u_fg, u_bg = _unary_maps(mask)
    energy = float(np.sum(x * u_fg + (1.0 - x) * u_bg))
    for dy, dx in _HALF_OFFSETS:
        h, w = kernel.height, kernel.width
        ys = slice(max(0, -dy), h - max(0, dy))
        yd = slice(max(0, dy), h - max(0, -dy))
        xs = slice(max(0, -dx), w - max(0, dx))
        xd = slice(max(0, dx), w - max(0, -dx))
        disagree = (x[ys, xs] != x[yd, xd]).astype(np.float64)
        energy += float(np.sum(kernel.weights[(dy, dx)][ys, xs] * disagree))
    for link in cross_links:
        tc = link.plan.values * link.cost.values
        xs_flat = np.asarray(link.neighbor_labeling, dtype=np.float64).ravel()
        xn = x.ravel()
        disagree = np.abs(xn[:, None] - xs_flat[None, :])
        energy += float(link.weight * np.sum(tc * disagree))
    return energy


def _mean_field_literal(mask, kernel, cross_links, config):
    q = -np.log(threshold_phi(mask))
    h, w = kernel.height, kernel.width
    cross = np.zeros((h, w))
    for link in cross_links:
        to_fg, to_bg = _link_messages(link, h, w)
        cross += to_bg  # k(i,j) q_j analogue: message weighted by x_k = 1
    it = 0
    converged = False
    while it < config.mf_iters:
        qhat = kernel.apply(q) + cross
        belief = np.exp(-qhat - q)
        q_new = -np.log(threshold_phi(np.clip(belief, 0.0, 1.0)))
        it += 1
        if np.abs(q_new - q).max() < config.mf_tol:
            q = q_new
            converged = True
            break
        q = q_new
    labeling = (np.exp(-q) > 0.5).astype(np.uint8)
    return labeling, MeanFieldState(np.exp(-q), it, converged)


def _mean_field_two_channel(mask, kernel, cross_links, config):
    mask = np.asarray(mask, dtype=np.float64)
    u_fg, u_bg = _unary_maps(mask)
    h, w = kernel.height, kernel.width
    cross_fg = np.zeros((h, w))
    cross_bg = np.zeros((h, w))
    for link in cross_links:
        to_fg, to_bg = _link_messages(link, h, w)
        cross_fg += to_fg
        cross_bg += to_bg
    q_fg = threshold_phi(mask)  # normalized exp(-unary)
    it = 0
    converged = False
    while it < config.mf_iters:
        e_fg = u_fg + kernel.apply(1.0 - q_fg) + cross_fg
        e_bg = u_bg + kernel.apply(q_fg) + cross_bg
        m = np.minimum(e_fg, e_bg)
        z_fg = np.exp(-(e_fg - m))
        z_bg = np.exp(-(e_bg - m))
        q_new = z_fg / (z_fg + z_bg)
        if not np.all(np.isfinite(q_new)):
            raise NonFiniteBelief("belief diverged")
        it += 1
        if np.abs(q_new - q_fg).max() < config.mf_tol:
            q_fg = q_new
            converged = True
            break
        q_fg = q_new
    labeling = (q_fg > 0.5).astype(np.uint8)
    return labeling, MeanFieldState(q_fg, it, converged)


def mean_field(
    mask: np.ndarray,
    kernel: PairwiseKernel,
    cross_links: list[CrossLink] = (),
    config: TeacherConfig | None = None,
):
    """Run mean-field refinement; returns (labeling, MeanFieldState)."""
    config = config or TeacherConfig()
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (kernel.height, kernel.width):
        raise DimMismatch(f"mask {mask.shape} vs kernel {(kernel.height, kernel.width)}")
    for link in cross_links:
        if link.neighbor_labeling.size != link.plan.cols or link.plan.rows != mask.size:
            raise DimMismatch("cross-link shapes inconsistent with RoI")
    if config.mode == "literal":
        return _mean_field_literal(mask, kernel, list(cross_links), config)
    return _mean_field_two_channel(mask, kernel, list(cross_links), config)
