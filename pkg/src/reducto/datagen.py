"""Synthetic data with known generative processes.

Every generator takes an explicit ``seed`` and is deterministic given it.
"""
from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from .bandit import CBLog
from .core import ContextualBandit, Example, Feature, Multiclass, ReductoError, SequenceExample
from .textformat import hash_feature


class BadDelta(ReductoError, ValueError):
    pass


CONST = hash_feature("const")


def inconsistency_probs(delta: float) -> np.ndarray:
    return np.array([0.5 - 2 * delta, 0.25 + delta, 0.25 + delta])


def gen_inconsistency(delta: float, n: int, seed: int = 0) -> List[Example]:
    """Three classes with probabilities ``(1/2 - 2d, 1/4 + d, 1/4 + d)`` and
    nothing to learn from but a constant feature.

    No class reaches probability 1/2, so every "is it class i?" classifier
    should answer no; for ``d < 1/12`` the first class is still the most
    likely one.
    """
    if not 0.0 <= delta < 1.0 / 12.0:
        raise BadDelta(f"delta must be in [0, 1/12), got {delta}")
    rng = np.random.default_rng(seed)
    labels = rng.choice(3, size=n, p=inconsistency_probs(delta))
    feats = (Feature(CONST, 1.0),)
    return [Example(feats, Multiclass(int(y))) for y in labels]


def _dense_ids(dim: int) -> List[int]:
    return [hash_feature(f"f{j}") for j in range(dim)]


def gen_multiclass(k: int, n: int, dim: int = 10, separation: float = 2.0,
                   label_noise: float = 0.0, seed: int = 0,
                   prototypes: Optional[np.ndarray] = None) -> List[Example]:
    """Gaussian clusters: ``x = separation * mu_y + N(0, I)`` with unit-norm
    random prototypes ``mu``.  With probability ``label_noise`` the label is
    then replaced by a uniformly random class.

    Passing the same ``prototypes`` (shape ``(k, dim)``) makes train and test
    sets from different seeds share one distribution.
    """
    rng = np.random.default_rng(seed)
    if prototypes is None:
        prototypes = make_prototypes(k, dim, seed)
    y = rng.integers(0, k, size=n)
    x = separation * prototypes[y] + rng.standard_normal((n, dim))
    flip = rng.random(n) < label_noise
    y = np.where(flip, rng.integers(0, k, size=n), y)
    ids = _dense_ids(dim)
    return [
        Example(tuple(Feature(i, v) for i, v in zip(ids, row)), Multiclass(int(c)))
        for row, c in zip(x.tolist(), y.tolist())
    ]


def make_prototypes(k: int, dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng([seed, 7919])
    mu = rng.standard_normal((k, dim))
    return mu / np.linalg.norm(mu, axis=1, keepdims=True)


def gen_separable(k: int, n: int, distractors: int = 5, seed: int = 0) -> List[Example]:
    """Class ``c`` always carries indicator feature ``class=c``; the other
    features are random noise in [0, 1).  Linearly separable by construction."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, k, size=n)
    noise = rng.random((n, distractors))
    cls_ids = [hash_feature(f"class={c}") for c in range(k)]
    ids = [hash_feature(f"noise{j}") for j in range(distractors)]
    out = []
    for c, row in zip(y.tolist(), noise.tolist()):
        feats = (Feature(cls_ids[c], 1.0),) + tuple(Feature(i, v) for i, v in zip(ids, row))
        out.append(Example(feats, Multiclass(c)))
    return out


def gen_hmm(k: int, T: int, n: int, sharpness: float = 0.9, emission_noise: float = 0.3,
            seed: int = 0, clean_first: bool = False) -> List[SequenceExample]:
    """Markov-chain tag sequences with noisy one-token emissions.

    Process, per sequence of length ``T``::

        y_1 ~ Uniform(k)
        y_t = (y_{t-1} + 1) mod k     with probability ``sharpness``
              ~ Uniform(k)             otherwise
        w_t = "w=<y_t>"                with probability 1 - ``emission_noise``
              "w=?"                    otherwise

    The noise token carries no information about the tag.  With
    ``clean_first`` the first token is never noisy.  A per-token classifier
    is capped at ``1 - e + e/k`` accuracy (``e`` the emission noise); a
    tagger that knows ``y_{t-1}`` gets a noisy position right with
    probability ``sharpness + (1 - sharpness)/k``.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    word_ids = [hash_feature(f"w={w}") for w in range(k)] + [hash_feature("w=?")]
    out = []
    for _ in range(n):
        tags = np.empty(T, dtype=np.int64)
        jump = rng.random(T) >= sharpness
        rand_tags = rng.integers(0, k, size=T)
        noisy = rng.random(T) < emission_noise
        if clean_first and T:
            noisy[0] = False
        for t in range(T):
            if t == 0 or jump[t]:
                tags[t] = rand_tags[t]
            else:
                tags[t] = (tags[t - 1] + 1) % k
        words = np.where(noisy, k, tags)
        tokens = tuple((Feature(word_ids[w], 1.0),) for w in words.tolist())
        out.append(SequenceExample(tokens, tuple(tags.tolist())))
    return out


def context_features(n_contexts: int) -> List[tuple]:
    return [(Feature(hash_feature(f"ctx={i}"), 1.0),) for i in range(n_contexts)]


def gen_cb_log(k: int, n_contexts: int, rewards: np.ndarray, n: int, seed: int = 0,
               logging: Optional[np.ndarray] = None, bernoulli: bool = True,
               context_probs: Optional[Sequence[float]] = None) -> CBLog:
    """Simulate logging: draw a context, an action from the logging policy,
    and a reward.

    ``rewards[x, a]`` is the mean reward (the reward itself when
    ``bernoulli`` is false).  ``logging[x, a]`` defaults to uniform.
    The true value of a deterministic policy ``pi`` is
    ``sum_x P(x) rewards[x, pi(x)]``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.shape != (n_contexts, k):
        raise ValueError(f"rewards must have shape {(n_contexts, k)}, got {rewards.shape}")
    if logging is None:
        logging = np.full((n_contexts, k), 1.0 / k)
    logging = np.asarray(logging, dtype=np.float64)
    rng = np.random.default_rng(seed)
    ctx_p = None if context_probs is None else np.asarray(context_probs, dtype=np.float64)
    xs = rng.choice(n_contexts, size=n, p=ctx_p)
    u = rng.random(n)
    cdf = np.cumsum(logging, axis=1)
    acts = np.minimum((u[:, None] >= cdf[xs]).sum(axis=1), k - 1)
    if bernoulli:
        rs = (rng.random(n) < rewards[xs, acts]).astype(np.float64)
    else:
        rs = rewards[xs, acts]
    feats = context_features(n_contexts)
    entries = [
        Example(feats[x], ContextualBandit(a, r, float(logging[x, a])))
        for x, a, r in zip(xs.tolist(), acts.tolist(), rs.tolist())
    ]
    return CBLog(entries, k)


def true_policy_value(rewards: np.ndarray, actions: Sequence[int],
                      context_probs: Optional[Sequence[float]] = None) -> float:
    rewards = np.asarray(rewards, dtype=np.float64)
    n_contexts = rewards.shape[0]
    w = np.full(n_contexts, 1.0 / n_contexts) if context_probs is None else np.asarray(context_probs)
    return float(np.sum(w * rewards[np.arange(n_contexts), np.asarray(actions)]))
