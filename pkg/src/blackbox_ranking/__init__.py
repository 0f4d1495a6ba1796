"""Blackbox-differentiable ranking and rank-based losses for numpy."""

from .errors import DegenerateInputError, InvalidInputError, UndefinedMetricError
from .losses import (
    LossResult,
    WeightScheme,
    ap_loss,
    apc_loss,
    average_precision,
    map_loss,
    recall_at_k,
    recall_loss,
    refined_recall_at_k,
)
from .memory import MemoryBuffer, mask_gradient
from .ranking import rank, rank_backward, rank_with_margin, shift_scores, surrogate_value

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputError",
    "InvalidInputError",
    "UndefinedMetricError",
    "LossResult",
    "WeightScheme",
    "ap_loss",
    "apc_loss",
    "average_precision",
    "map_loss",
    "recall_at_k",
    "recall_loss",
    "refined_recall_at_k",
    "MemoryBuffer",
    "mask_gradient",
    "rank",
    "rank_backward",
    "rank_with_margin",
    "shift_scores",
    "surrogate_value",
]
