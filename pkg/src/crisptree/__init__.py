"""Crisp decision-tree control policies trained by soft actor-critic."""

__version__ = "0.1.0"

from .actions import ActionBounds
from .tree import CrispTree, TreePolicy, count_params, crisp_predict, crisp_predict_batch

__all__ = [
    "ActionBounds",
    "CrispTree",
    "TreePolicy",
    "count_params",
    "crisp_predict",
    "crisp_predict_batch",
]
