"""Kolmogorov models for binary user/item preference data.

Fit ``P[user u likes item i] = theta_u @ psi_i`` with ``theta_u`` a PMF over
``D`` elementary events and ``psi_i`` a 0/1 indicator, then read
deterministic "likes"/"dislikes" implications off the indicators.
"""

from .binary_sdr import (
    BinaryQpProblem,
    SdrConfig,
    g_value,
    homogenize,
    randomized_rounding,
    refine_indicator,
    solve_binary_exhaustive,
)
from .dataio import EvalConfig, evaluate, grid_search, load_ratings, nrmse, rmse, split
from .model import (
    KolmogorovModel,
    ObservationSet,
    load_model,
    predict,
    predict_many,
    save_model,
)
from .rules import RuleReport, build_adjacency, influence_scores, maximal_set, mine_rules
from .sdp_mixing import SdpConfig, solve_sdp
from .simplex_fw import FwConfig, SimplexQpProblem, fw_gap, fw_gradient, lp_on_simplex, solve_simplex_qp
from .trainer import TrainConfig, TrainTrace, ikm_step, train

__version__ = "0.1.0"

__all__ = [
    "BinaryQpProblem",
    "EvalConfig",
    "FwConfig",
    "KolmogorovModel",
    "ObservationSet",
    "RuleReport",
    "SdpConfig",
    "SdrConfig",
    "SimplexQpProblem",
    "TrainConfig",
    "TrainTrace",
    "build_adjacency",
    "evaluate",
    "fw_gap",
    "fw_gradient",
    "g_value",
    "grid_search",
    "homogenize",
    "ikm_step",
    "influence_scores",
    "load_model",
    "load_ratings",
    "lp_on_simplex",
    "maximal_set",
    "mine_rules",
    "nrmse",
    "predict",
    "predict_many",
    "randomized_rounding",
    "refine_indicator",
    "rmse",
    "save_model",
    "solve_binary_exhaustive",
    "solve_sdp",
    "solve_simplex_qp",
    "split",
    "train",
]
