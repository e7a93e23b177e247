"""Contextual bandit learning from logged ``(x, a, r, p)`` records.

Policies are learned by turning each record into an importance-weighted
cost vector (cost = 1 - reward, divided by the logging probability on the
logged action, 0 elsewhere) and handing it to a cost-sensitive learner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

from .core import (
    ClassOutOfRange, ContextualBandit, CostSensitive, Example, InvalidProbability,
    ReductoError, TaskKind,
)
from .stack import Layer, register_layer, reject_extra, take_k


class EmptyLog(ReductoError, ValueError):
    pass


@dataclass
class CBLog:
    entries: List[Example] = field(default_factory=list)
    k: int = 2

    def __post_init__(self):
        for e in self.entries:
            lab = e.label
            if not isinstance(lab, ContextualBandit):
                raise TypeError(f"CBLog entries need ContextualBandit labels, got {type(lab).__name__}")
            if lab.action >= self.k:
                raise ClassOutOfRange(f"action {lab.action} outside 0..{self.k - 1}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def cb_to_cs_ips(label: ContextualBandit, k: int) -> CostSensitive:
    """Inverse-propensity cost vector for one logged outcome.

    In expectation over the logging policy, the cost of every action equals
    its true expected cost ``1 - r(a)``.
    """
    if not label.prob > 0.0:
        raise InvalidProbability(f"logging probability must be positive, got {label.prob}")
    if not 0 <= label.action < k:
        raise ClassOutOfRange(f"action {label.action} outside 0..{k - 1}")
    observed = (1.0 - label.reward) / label.prob
    return CostSensitive(tuple((a, observed if a == label.action else 0.0) for a in range(k)))


class ContextualBanditLayer(Layer):
    """Rewrites bandit labels as IPS cost vectors for a ``csoaa`` below it."""

    name = "cb"
    consumes = TaskKind.CONTEXTUAL_BANDIT
    emits = TaskKind.COST_SENSITIVE
    num_instances = 1

    def __init__(self, k: int):
        self.k = k

    def params(self):
        return {"k": self.k}

    def predict(self, ex, below):
        return below.predict(ex, 0)

    def learn(self, ex, label, below, weight=1.0):
        return below.learn(ex, 0, cb_to_cs_ips(label, self.k), weight)


@register_layer("cb")
def _make_cb(pos, kw):
    k = take_k(pos, kw)
    reject_extra("cb", pos, kw)
    return ContextualBanditLayer(k)


def stack_policy(stack) -> Callable[[Example], int]:
    """Greedy policy of a trained stack, as a callable ``example -> action``."""
    return lambda ex: stack.predict(ex).cls


def policy_value_ips(log: CBLog | Sequence[Example], policy: Callable[[Example], int]) -> float:
    """IPS estimate ``mean(r * I(policy(x) == a) / p)`` of a policy's value.

    ``math.fsum`` keeps the estimate independent of summation order.
    """
    entries = log.entries if isinstance(log, CBLog) else list(log)
    if not entries:
        raise EmptyLog("cannot evaluate a policy on an empty log")
    terms = []
    for e in entries:
        lab = e.label
        if policy(e) == lab.action:
            terms.append(lab.reward / lab.prob)
    return math.fsum(terms) / len(entries)
