"""Shared data model: features, labels, predictions, examples and errors.

Class and action indices are 0-based everywhere inside the library.  The text
format (see :mod:`reducto.textformat`) is 1-based; conversion happens there and
nowhere else.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union


class ReductoError(Exception):
    """Base class for every error raised by this package."""


class MismatchedLabel(ReductoError, ValueError):
    pass


class NonFiniteFeature(ReductoError, ValueError):
    pass


class InvalidExample(ReductoError, ValueError):
    pass


class InvalidProbability(ReductoError, ValueError):
    pass


class ClassOutOfRange(ReductoError, ValueError):
    pass


class ConfigError(ReductoError, ValueError):
    pass


class Feature(NamedTuple):
    """A hashed feature.  ``id`` is the full hash; masking happens at lookup."""

    id: int
    value: float


# --------------------------------------------------------------------------
# labels


@dataclass(frozen=True, slots=True)
class Binary:
    y: int

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise MismatchedLabel(f"binary label must be -1 or +1, got {self.y!r}")


@dataclass(frozen=True, slots=True)
class Regression:
    target: float


@dataclass(frozen=True, slots=True)
class Multiclass:
    cls: int

    def __post_init__(self):
        if self.cls < 0:
            raise ClassOutOfRange(f"class index must be >= 0, got {self.cls}")


@dataclass(frozen=True, slots=True)
class CostSensitive:
    """Per-class costs as ``((class, cost), ...)``; classes absent from the
    list are simply not trained on."""

    costs: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        if not self.costs:
            raise MismatchedLabel("cost-sensitive label needs at least one cost")
        classes = [c for c, _ in self.costs]
        if len(set(classes)) != len(classes):
            raise MismatchedLabel(f"duplicate classes in cost list {classes}")
        for c, cost in self.costs:
            if c < 0:
                raise ClassOutOfRange(f"class index must be >= 0, got {c}")
            if not (cost >= 0.0) or math.isinf(cost):
                raise MismatchedLabel(f"costs must be finite and >= 0, got {cost!r}")

    def cost_of(self, cls: int) -> Optional[float]:
        for c, cost in self.costs:
            if c == cls:
                return cost
        return None


@dataclass(frozen=True, slots=True)
class ContextualBandit:
    """A logged bandit outcome: action taken, reward observed, and the
    probability the logging policy had of taking that action."""

    action: int
    reward: float
    prob: float

    def __post_init__(self):
        if self.action < 0:
            raise ClassOutOfRange(f"action index must be >= 0, got {self.action}")
        if not (0.0 < self.prob <= 1.0):
            raise InvalidProbability(f"logging probability must be in (0, 1], got {self.prob!r}")
        if not (0.0 <= self.reward <= 1.0):
            raise MismatchedLabel(f"reward must be in [0, 1], got {self.reward!r}")

    @property
    def cost(self) -> float:
        return 1.0 - self.reward


class _Unlabeled:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNLABELED"

    def __reduce__(self):
        return (_Unlabeled, ())


UNLABELED = _Unlabeled()

Label = Union[Binary, Regression, Multiclass, CostSensitive, ContextualBandit, _Unlabeled]

POSITIVE = Binary(1)
NEGATIVE = Binary(-1)


# --------------------------------------------------------------------------
# predictions


@dataclass(frozen=True, slots=True)
class ScalarPrediction:
    score: float


@dataclass(frozen=True, slots=True)
class BinaryPrediction:
    y: int


@dataclass(frozen=True, slots=True)
class MulticlassPrediction:
    """``scores`` is ``None`` for reductions that do not pick by score."""

    cls: int
    scores: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True, slots=True)
class SequencePrediction:
    tags: Tuple[int, ...]


Prediction = Union[ScalarPrediction, BinaryPrediction, MulticlassPrediction, SequencePrediction]


# --------------------------------------------------------------------------
# examples


@dataclass(frozen=True, slots=True)
class Example:
    features: Tuple[Feature, ...]
    label: Label = UNLABELED
    importance: float = 1.0
    tag: Optional[str] = None


@dataclass(frozen=True, slots=True)
class SequenceExample:
    """One feature tuple per position; ``gold`` holds 0-based tags."""

    tokens: Tuple[Tuple[Feature, ...], ...]
    gold: Optional[Tuple[int, ...]] = None
    importance: float = 1.0
    tag: Optional[str] = None

    @property
    def label(self):
        return UNLABELED if self.gold is None else self.gold

    def __len__(self):
        return len(self.tokens)


class TaskKind(enum.Enum):
    BINARY = "binary"
    REGRESSION = "regression"
    MULTICLASS = "multiclass"
    COST_SENSITIVE = "cost_sensitive"
    CONTEXTUAL_BANDIT = "contextual_bandit"
    SEQUENCE = "sequence"


LABEL_TYPES = {
    TaskKind.BINARY: (Binary,),
    TaskKind.REGRESSION: (Regression,),
    TaskKind.MULTICLASS: (Multiclass,),
    TaskKind.COST_SENSITIVE: (CostSensitive,),
    TaskKind.CONTEXTUAL_BANDIT: (ContextualBandit,),
}


def make_features(pairs: Sequence[Tuple[int, float]]) -> Tuple[Feature, ...]:
    return tuple(Feature(int(i), float(v)) for i, v in pairs)


def _check_features(features, where=""):
    for f in features:
        if not math.isfinite(f.value):
            raise NonFiniteFeature(f"feature {f.id}{where} has non-finite value {f.value!r}")


def validate_example(e, task: TaskKind, k: Optional[int] = None) -> None:
    """Raise if ``e`` cannot be fed to a stack whose top consumes ``task``.

    Unlabeled examples are accepted for every task (prediction only).  When
    ``k`` is given, class, action and tag indices are range-checked too.
    Returns ``None`` on success.
    """
    if not (e.importance > 0.0) or not math.isfinite(e.importance):
        raise InvalidExample(f"importance must be a positive finite number, got {e.importance!r}")

    if task is TaskKind.SEQUENCE:
        if not isinstance(e, SequenceExample):
            raise MismatchedLabel(f"sequence task needs a SequenceExample, got {type(e).__name__}")
        for t, tok in enumerate(e.tokens):
            _check_features(tok, f" at position {t}")
        if e.gold is not None:
            if len(e.gold) != len(e.tokens):
                raise MismatchedLabel(
                    f"{len(e.gold)} gold tags for {len(e.tokens)} positions"
                )
            if k is not None and any(not 0 <= g < k for g in e.gold):
                raise ClassOutOfRange(f"gold tags {e.gold} outside 0..{k - 1}")
        return

    if isinstance(e, SequenceExample):
        raise MismatchedLabel(f"{task.value} task cannot take a SequenceExample")
    _check_features(e.features)
    label = e.label
    if label is UNLABELED:
        return
    if not isinstance(label, LABEL_TYPES[task]):
        raise MismatchedLabel(f"{type(label).__name__} label given to a {task.value} stack")
    if k is None:
        return
    if isinstance(label, Multiclass) and label.cls >= k:
        raise ClassOutOfRange(f"class {label.cls} outside 0..{k - 1}")
    if isinstance(label, CostSensitive) and any(c >= k for c, _ in label.costs):
        raise ClassOutOfRange(f"cost list {label.costs} names a class outside 0..{k - 1}")
    if isinstance(label, ContextualBandit) and label.action >= k:
        raise ClassOutOfRange(f"action {label.action} outside 0..{k - 1}")
