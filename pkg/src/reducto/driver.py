"""Train/test loops over text data with progressive validation."""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, List, Optional, Tuple

from .base import BaseConfig, loss_value
from .core import (
    UNLABELED, Binary, ConfigError, ContextualBandit, CostSensitive, Multiclass,
    MulticlassPrediction, Regression, ScalarPrediction, SequenceExample,
    SequencePrediction, TaskKind, validate_example,
)
from .stack import ReductionStack, build_stack
from .textformat import iter_examples, iter_sequences
from .weights import DEFAULT_BITS, load_weights, save_weights

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    stack: Optional[str] = None
    bits: int = DEFAULT_BITS
    base: BaseConfig = field(default_factory=BaseConfig)
    passes: int = 1
    seed: int = 0
    test_only: bool = False
    data: Optional[str] = None
    model_in: Optional[str] = None
    model_out: Optional[str] = None
    predictions: Optional[str] = None
    scores: bool = False
    affixes: bool = False

    def __post_init__(self):
        if self.test_only and not self.model_in:
            raise ConfigError("test mode (-t) needs a model to load (-i)")
        if not self.stack and not self.model_in:
            raise ConfigError("give a reduction stack (--stack or a sugar flag) or a model (-i)")
        if self.passes < 1:
            raise ConfigError(f"passes must be >= 1, got {self.passes}")


@dataclass
class RunSummary:
    examples: int
    passes: int
    learn_calls: int
    average_loss: float
    progress: List[Tuple[int, float]]
    stack: ReductionStack = field(repr=False)


def make_stack(config: RunConfig) -> ReductionStack:
    if config.model_in is None:
        return build_stack(config.stack, bits=config.bits, base_config=config.base, seed=config.seed)
    loaded = load_weights(config.model_in)
    if config.stack:
        probe = build_stack(config.stack, bits=1, base_config=config.base, seed=config.seed)
        if probe.config != loaded.stack_config:
            raise ConfigError(
                f"stack {probe.config!r} does not match the model's {loaded.stack_config!r}"
            )
    stack = build_stack(loaded.stack_config, bits=loaded.bits, base_config=config.base,
                        seed=config.seed)
    if stack.store.stride != loaded.stride:
        raise ConfigError(f"model stride {loaded.stride} does not fit stack {stack.config!r}")
    stack.store.weights[:] = loaded.weights
    return stack


def read_data(stack: ReductionStack, lines: Iterable[str], affixes: bool = False) -> Iterator:
    if stack.task is TaskKind.SEQUENCE:
        for seq in iter_sequences(lines, affixes):
            validate_example(seq, stack.task, stack.k)
            yield seq
        return
    for ex in iter_examples(lines, stack.task, affixes):
        validate_example(ex, stack.task, stack.k)
        yield ex


def example_loss(stack: ReductionStack, ex, pred) -> Optional[float]:
    """Task loss of ``pred`` on ``ex``; ``None`` for unlabeled examples.

    Cost-sensitive: the predicted class's cost, or the largest listed cost
    when it is not listed.  Bandit: the IPS estimate of the predicted
    action's cost.  Sequences: Hamming errors.
    """
    if isinstance(ex, SequenceExample):
        if ex.gold is None:
            return None
        return float(sum(p != g for p, g in zip(pred.tags, ex.gold)))
    label = ex.label
    if label is UNLABELED:
        return None
    if isinstance(label, Multiclass):
        return float(pred.cls != label.cls)
    if isinstance(label, CostSensitive):
        cost = label.cost_of(pred.cls)
        return cost if cost is not None else max(c for _, c in label.costs)
    if isinstance(label, ContextualBandit):
        return (1.0 - label.reward) / label.prob if pred.cls == label.action else 0.0
    if isinstance(label, Binary):
        return float((pred.score > 0) != (label.y > 0))
    if isinstance(label, Regression):
        return loss_value("squared", pred.score, label.target)
    return None


def format_prediction(pred, tag: Optional[str] = None, scores: bool = False) -> str:
    if isinstance(pred, MulticlassPrediction):
        text = str(pred.cls + 1)
        if scores and pred.scores is not None:
            text += " " + " ".join(repr(s) for s in pred.scores)
    elif isinstance(pred, ScalarPrediction):
        text = repr(pred.score)
    elif isinstance(pred, SequencePrediction):
        text = " ".join(str(t + 1) for t in pred.tags)
    else:
        text = str(pred)
    return f"{text} {tag}" if tag is not None else text


class _Progress:
    """Running average loss, reported at every power-of-two example count."""

    def __init__(self):
        self.count = 0
        self.labeled = 0
        self.total = 0.0
        self.since = 0.0
        self.since_n = 0
        self.next_report = 1
        self.points: List[Tuple[int, float]] = []

    def add(self, loss):
        self.count += 1
        if loss is not None:
            self.labeled += 1
            self.total += loss
            self.since += loss
            self.since_n += 1
        if self.count == self.next_report:
            avg = self.average
            self.points.append((self.count, avg))
            since = self.since / self.since_n if self.since_n else float("nan")
            log.info("%10d examples  average loss %.6f  since last %.6f", self.count, avg, since)
            self.since = 0.0
            self.since_n = 0
            self.next_report *= 2

    @property
    def average(self):
        return self.total / self.labeled if self.labeled else float("nan")


def _open_lines(path: Optional[str]) -> List[str] | IO:
    if path is None or path == "-":
        return sys.stdin
    return open(path, "r", encoding="utf-8")


def _passes_over(path, passes):
    if path is None or path == "-":
        lines = sys.stdin.readlines()
        for _ in range(passes):
            yield lines
        return
    for _ in range(passes):
        with open(path, "r", encoding="utf-8") as fh:
            yield fh


def run_train(config: RunConfig, lines: Optional[Iterable[str]] = None) -> RunSummary:
    """Stream the data ``passes`` times through ``learn``.

    The reported loss is progressive: each example is scored by the
    prediction ``learn`` returns, which precedes its own update.
    """
    if lines is not None and not isinstance(lines, list):
        raise ConfigError("in-memory training data must be a list of lines")
    stack = make_stack(config)
    progress = _Progress()
    out = open(config.predictions, "w", encoding="utf-8") if config.predictions else None
    sources = [lines] * config.passes if lines is not None else _passes_over(config.data, config.passes)
    try:
        n_seen = 0
        for source in sources:
            for ex in read_data(stack, source, config.affixes):
                pred = stack.learn(ex)
                n_seen += 1
                progress.add(example_loss(stack, ex, pred))
                if out:
                    out.write(format_prediction(pred, ex.tag, config.scores) + "\n")
    finally:
        if out:
            out.close()
    if config.model_out:
        save_weights(stack.store, config.model_out, stack.config)
    return RunSummary(n_seen, config.passes, stack.learn_calls, progress.average,
                      progress.points, stack)


def run_test(config: RunConfig, lines: Optional[Iterable[str]] = None) -> RunSummary:
    """Predict only; the model is never updated."""
    stack = make_stack(config)
    progress = _Progress()
    out = open(config.predictions, "w", encoding="utf-8") if config.predictions else None
    source = lines if lines is not None else _open_lines(config.data)
    try:
        for ex in read_data(stack, source, config.affixes):
            pred = stack.predict(ex)
            stack.step()
            progress.add(example_loss(stack, ex, pred))
            if out:
                out.write(format_prediction(pred, ex.tag, config.scores) + "\n")
    finally:
        if out:
            out.close()
        if source is not sys.stdin and hasattr(source, "close"):
            source.close()
    return RunSummary(progress.count, 1, 0, progress.average, progress.points, stack)
