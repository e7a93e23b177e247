"""Learning to search for sequence labeling.

Tagging a sequence left to right is treated as a search problem: at each
position the policy picks a tag given the token features and the previously
chosen tags.  Training turns every position of every sequence into a
cost-sensitive example whose cost for tag ``a`` is the Hamming loss of the
completed sequence after choosing ``a`` (prefix from the roll-in policy,
suffix from the roll-out policy), minus the cheapest choice.  The
cost-sensitive examples go to a ``csoaa`` layer, which regresses costs.

All examples of one episode are generated with the policy as it was at the
start of the episode and learned afterwards, so a ``learn`` call returns the
same tags a ``predict`` call made just before it would.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

from .core import (
    ConfigError, CostSensitive, Example, Feature, Multiclass, ReductoError,
    SequenceExample, SequencePrediction, TaskKind,
)
from .stack import Layer, build_stack, register_layer, reject_extra, take_k
from .textformat import fnv1a_64

START = -1
ROLLINS = ("learned", "reference", "mix")
ROLLOUTS = ("reference", "learned", "mix")
_SALT_ROLLIN = 0x5EA1
_SALT_ROLLOUT = 0x5EA2


class MissingGold(ReductoError, ValueError):
    pass


_history_ids: dict = {}


def history_feature_id(slot: int, tag: int) -> int:
    """Hashed id for "the tag ``slot`` positions back was ``tag``"."""
    key = (slot, tag)
    h = _history_ids.get(key)
    if h is None:
        h = _history_ids[key] = fnv1a_64(f"\x00hist{slot}={tag}")
    return h


def make_position_features(seq: SequenceExample, t: int, history_tags: Sequence[int],
                           history: int = 1) -> tuple:
    """Token features at position ``t`` (0-based) plus one indicator per
    look-back slot naming the previous tag (``START`` before the beginning).

    ``history_tags`` holds the tags chosen at positions ``0..t-1``.
    """
    feats = seq.tokens[t]
    if history <= 0:
        return feats
    extra = []
    for j in range(1, history + 1):
        tag = history_tags[t - j] if t - j >= 0 else START
        extra.append(Feature(history_feature_id(j, tag), 1.0))
    return feats + tuple(extra)


@dataclass
class SearchState:
    k: int
    rollin: str = "learned"
    rollout: str = "reference"
    beta: float = 0.5
    history: int = 1
    passes: int = 3

    def __post_init__(self):
        if self.rollin not in ROLLINS:
            raise ConfigError(f"rollin must be one of {ROLLINS}, got {self.rollin!r}")
        if self.rollout not in ROLLOUTS:
            raise ConfigError(f"rollout must be one of {ROLLOUTS}, got {self.rollout!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.history < 0:
            raise ConfigError(f"history must be >= 0, got {self.history}")


class Search(Layer):
    name = "search"
    consumes = TaskKind.SEQUENCE
    emits = TaskKind.COST_SENSITIVE
    num_instances = 1

    def __init__(self, state: SearchState):
        self.state = state
        self.k = state.k

    def params(self):
        s = self.state
        p = {"k": s.k}
        if s.rollin != "learned":
            p["rollin"] = s.rollin
        if s.rollout != "reference":
            p["rollout"] = s.rollout
        if s.beta != 0.5:
            p["beta"] = s.beta
        if s.history != 1:
            p["history"] = s.history
        return p

    def _features(self, seq, t, path):
        return make_position_features(seq, t, path, self.state.history)

    def _act(self, seq, t, path, below) -> int:
        return below.predict(Example(self._features(seq, t, path)), 0).cls

    def _greedy(self, seq, start, path, below) -> List[int]:
        path = list(path)
        for t in range(start, len(seq.tokens)):
            path.append(self._act(seq, t, path, below))
        return path

    def predict(self, seq, below):
        return SequencePrediction(tuple(self._greedy(seq, 0, [], below)))

    def _costs(self, seq, t, path, gold, below, learned_rollout: bool):
        k = self.k
        if not learned_rollout:
            return [0.0 if a == gold[t] else 1.0 for a in range(k)]
        losses = []
        for a in range(k):
            completed = self._greedy(seq, t + 1, list(path) + [a], below)
            losses.append(float(sum(p != g for p, g in zip(completed[t:], gold[t:]))))
        low = min(losses)
        return [l - low for l in losses]

    def episode(self, seq: SequenceExample, gold, below, weight: float = 1.0):
        """Cost-sensitive examples for one sequence, plus the pre-update
        greedy prediction (which is also the learned roll-in)."""
        if gold is None:
            raise MissingGold("search training needs gold tags")
        st = self.state
        T = len(seq.tokens)
        if len(gold) != T:
            raise MissingGold(f"{len(gold)} gold tags for {T} positions")
        predicted = self._greedy(seq, 0, [], below)
        rng = self.rng
        out = []
        path: List[int] = []
        for t in range(T):
            if st.rollout == "learned":
                learned_out = True
            elif st.rollout == "mix":
                learned_out = rng.uniform(_SALT_ROLLOUT, t) >= st.beta
            else:
                learned_out = False
            costs = self._costs(seq, t, path, gold, below, learned_out)
            feats = self._features(seq, t, path)
            out.append(Example(feats, CostSensitive(tuple(enumerate(costs))),
                               seq.importance * weight))
            if st.rollin == "reference":
                path.append(gold[t])
            elif st.rollin == "learned":
                path.append(predicted[t])
            elif rng.uniform(_SALT_ROLLIN, t) < st.beta:
                path.append(gold[t])
            else:
                path.append(self._act(seq, t, path, below))
        return out, SequencePrediction(tuple(predicted))

    def learn(self, seq, label, below, weight=1.0):
        examples, pred = self.episode(seq, label, below, weight)
        for ex in examples:
            below.learn(ex, 0, ex.label)
        return pred


@register_layer("search")
def _make_search(pos, kw):
    k = take_k(pos, kw, "tags")
    args = {}
    for key in ("rollin", "rollout"):
        if key in kw:
            args[key] = kw.pop(key)
    if "beta" in kw:
        args["beta"] = float(kw.pop("beta"))
    if "history" in kw:
        args["history"] = int(kw.pop("history"))
    reject_extra("search", pos, kw)
    return Search(SearchState(k, **args))


def search_predict(stack, seq) -> SequencePrediction:
    return stack.predict(seq)


def hamming_loss(predicted: Sequence[int], gold: Sequence[int]) -> int:
    return sum(p != g for p, g in zip(predicted, gold))


# --------------------------------------------------------------------------
# unstructured baseline


def token_examples(seqs: Sequence[SequenceExample]):
    """Flatten sequences into per-token multiclass examples (no history)."""
    for seq in seqs:
        for t, feats in enumerate(seq.tokens):
            if seq.gold is None:
                yield Example(feats)
            else:
                yield Example(feats, Multiclass(seq.gold[t]), seq.importance)


def independent_baseline(seqs: Sequence[SequenceExample], k: int, passes: int = 3,
                         bits: int = 18, base_config=None, seed: int = 0):
    """Train a per-token ``oaa_scores`` classifier; returns the stack."""
    stack = build_stack(f"oaa_scores:{k}|base", bits=bits, base_config=base_config, seed=seed)
    for _ in range(passes):
        for ex in token_examples(seqs):
            stack.learn(ex)
    return stack


def predict_independent(stack, seq: SequenceExample) -> List[int]:
    return [stack.predict(Example(feats)).cls for feats in seq.tokens]


def train_search(seqs: Sequence[SequenceExample], state: SearchState, bits: int = 18,
                 base_config=None, seed: int = 0):
    """Build ``search|csoaa|base`` for ``state`` and run ``state.passes``
    passes over ``seqs``; returns the stack."""
    layer = Search(state)
    stack = build_stack(f"{layer.canonical()}|csoaa:{state.k}|base", bits=bits,
                        base_config=base_config, seed=seed)
    stack.layers[0].state.passes = state.passes
    for _ in range(state.passes):
        for seq in seqs:
            stack.learn(seq)
    return stack


def accuracy(predictions: Sequence[Sequence[int]], seqs: Sequence[SequenceExample]) -> float:
    errors = total = 0
    for pred, seq in zip(predictions, seqs):
        errors += hamming_loss(pred, seq.gold)
        total += len(seq.gold)
    return 1.0 - errors / total if total else 1.0
