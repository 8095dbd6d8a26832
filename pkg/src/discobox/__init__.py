"""Numerical engine for box-supervised mask refinement and dense
semantic correspondence: MIL bag losses, Sinkhorn optimal transport,
ICM cost-volume matching, mean-field CRF refinement, a per-category
memory bank, and a multi-object correspondence AP metric."""

from . import corrmetric, crf, membank, mil, synthgen, teacher, transport
from .config import RunConfig, load_config
from .correspondence import (
    CostVolume,
    MatchResult,
    SinkhornConfig,
    cost_volume_u,
    geometric_consistency,
    icm_match,
)
from .crf import CrossLink, TeacherConfig, build_kernel, gibbs_energy, mean_field, threshold_phi
from .membank import MemoryBank
from .mil import BagSet, build_bags, mil_loss_bce, mil_loss_dice
from .teacher import (
    LossWeights,
    ParamVector,
    RefineConfig,
    RefinementOutput,
    consistency_loss,
    ema_update,
    nce_loss,
    refine_batch,
    total_loss,
)
from .tensors import RoiObject, TensorBundle, read_bundle, resample_roi, write_bundle
from .transport import TransportPlan, sinkhorn, step_marginal, transport_cost

__version__ = "0.1.0"
