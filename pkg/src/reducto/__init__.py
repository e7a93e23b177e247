"""Composable online learning reductions over a striped linear learner."""
from .base import BaseConfig, BaseLearner
from .core import (
    UNLABELED, Binary, ContextualBandit, CostSensitive, Example, Feature,
    Multiclass, MulticlassPrediction, Regression, ScalarPrediction,
    SequenceExample, SequencePrediction, TaskKind, validate_example,
)
from .stack import ReductionStack, build_stack
from .weights import WeightStore, load_weights, new_store, save_weights
from . import bandit, multiclass, search  # noqa: F401  (registers layers)

__version__ = "0.1.0"

__all__ = [
    "BaseConfig", "BaseLearner", "Binary", "ContextualBandit", "CostSensitive",
    "Example", "Feature", "Multiclass", "MulticlassPrediction", "Regression",
    "ReductionStack", "ScalarPrediction", "SequenceExample", "SequencePrediction",
    "TaskKind", "UNLABELED", "WeightStore", "build_stack", "load_weights",
    "new_store", "save_weights", "validate_example",
]
