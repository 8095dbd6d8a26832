"""Batch refinement orchestration and the self-ensembling losses.

For each RoI in a batch: retrieve intra-class neighbors from the
memory bank, match against each with the ICM matcher, run mean-field
with the resulting cross-links, and report the loss terms. Objects are
pushed to the bank only after every loss in the batch is computed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import membank, mil
from .correspondence import CostVolume, MatchResult, SinkhornConfig, icm_match
from .crf import CrossLink, TeacherConfig, build_kernel, mean_field
from .errors import DimMismatch, LengthMismatch, NonPositiveTau
from .membank import MemoryBank
from .tensors import RoiObject
from .transport import TransportPlan, step_marginal

EPS = 1e-7


@dataclass
class LossWeights:
    alpha_mil: float = 10.0
    alpha_con: float = 2.0
    alpha_nce: float = 0.1


@dataclass
class RefineConfig:
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    icm_iters: int = 2
    temperature: float = 0.1
    weights: LossWeights = field(default_factory=LossWeights)
    mil_variant: str = "bce"  # or "dice"
    seed: int = 0
    threads: int = 1


@dataclass
class RefinementOutput:
    id: str
    labeling: np.ndarray  # (H, W) uint8 pseudo-label
    matches: list[MatchResult]
    l_mil: float
    l_con: float
    l_nce: float
    total: float


def consistency_loss(x: np.ndarray, m: np.ndarray) -> float:
    """Mean pixelwise cross-entropy between a binary pseudo-label and
    the predicted mask probabilities."""
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if x.shape != m.shape:
        raise DimMismatch(f"labeling {x.shape} vs mask {m.shape}")
    m = np.clip(m, EPS, 1.0 - EPS)
    return float(-np.mean(x * np.log(m) + (1.0 - x) * np.log(1.0 - m)))


def nce_loss(c_u: CostVolume, plan: TransportPlan, tau: float) -> float:
    """Dense InfoNCE over source pixels: the plan's row argmax picks the
    positive, every target pixel is a candidate."""
    if tau <= 0:
        raise NonPositiveTau(f"temperature must be positive, got {tau}")
    sims = np.asarray(c_u.values, dtype=np.float64) / tau
    targets = np.argmax(plan.values, axis=1)
    shifted = sims - sims.max(axis=1, keepdims=True)
    logz = np.log(np.sum(np.exp(shifted), axis=1))
    pos = shifted[np.arange(sims.shape[0]), targets]
    return float(-np.mean(pos - logz))


def total_loss(l_mil: float, l_con: float, l_nce: float, weights: LossWeights) -> float:
    return (
        weights.alpha_mil * l_mil
        + weights.alpha_con * l_con
        + weights.alpha_nce * l_nce
    )


@dataclass
class ParamVector:
    values: np.ndarray
    version: int = 0


def ema_update(theta_t: ParamVector, theta_s: ParamVector, m: float) -> ParamVector:
    """theta_t <- m * theta_t + (1 - m) * theta_s (momentum 0.999 in the
    usual setup)."""
    if theta_t.values.shape != theta_s.values.shape:
        raise LengthMismatch(
            f"{theta_t.values.shape} vs {theta_s.values.shape}"
        )
    return ParamVector(m * theta_t.values + (1.0 - m) * theta_s.values, theta_t.version + 1)


def _refine_one(obj: RoiObject, neighbors, config: RefineConfig) -> RefinementOutput:
    h, w = obj.resolution
    mu_a = step_marginal(obj.mask)
    matches = []
    links = []
    for entry in neighbors:
        mu_b = step_marginal(entry.mask)
        match = icm_match(
            obj.feature,
            entry.feature,
            mu_a,
            mu_b,
            icm_iters=config.icm_iters,
            sinkhorn_cfg=config.sinkhorn,
            gamma=config.teacher.gamma,
        )
        matches.append(match)
        links.append(
            CrossLink(
                plan=match.plan,
                cost=match.combined_cost,
                neighbor_labeling=(np.asarray(entry.mask) > 0.5).astype(np.uint8),
                weight=config.teacher.w2,
            )
        )
    kernel = build_kernel(obj.rgb, config.teacher.w1, config.teacher.zeta)
    labeling, _ = mean_field(obj.mask, kernel, links, config.teacher)

    bags = mil.build_bags(h, w, (0, 0, w, h))
    if config.mil_variant == "dice":
        l_mil = mil.mil_loss_dice(bags, obj.mask)
    else:
        l_mil = mil.mil_loss_bce(bags, obj.mask)
    l_con = consistency_loss(labeling, obj.mask)
    if matches:
        l_nce = float(
            np.mean([nce_loss(m.appearance, m.plan, config.temperature) for m in matches])
        )
    else:
        l_nce = 0.0
    return RefinementOutput(
        id=obj.id,
        labeling=labeling,
        matches=matches,
        l_mil=l_mil,
        l_con=l_con,
        l_nce=l_nce,
        total=total_loss(l_mil, l_con, l_nce, config.weights),
    )


def refine_batch(
    objects: list[RoiObject],
    bank: MemoryBank,
    config: RefineConfig | None = None,
) -> list[RefinementOutput]:
    """Refine a batch of RoIs against the memory bank.

    Deterministic under config.seed; bank pushes happen after all
    losses are computed, in input order.
    """
    config = config or RefineConfig()
    jobs = []
    for idx, obj in enumerate(objects):
        seed = int(np.random.SeedSequence([config.seed, idx]).generate_state(1)[0])
        jobs.append((obj, membank.retrieve(bank, obj.category, seed)))
    if config.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outputs = list(
                pool.map(lambda j: _refine_one(j[0], j[1], config), jobs)
            )
    else:
        outputs = [_refine_one(obj, nb, config) for obj, nb in jobs]
    for obj in objects:
        membank.push(bank, obj)
    return outputs
