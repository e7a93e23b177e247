"""Multiclass reductions: one-against-all (binary, weighted, regression),
cost-sensitive one-against-all, error-correcting output codes, and a
fixed-structure logarithmic-time label tree.

Reductions that pick by score break ties toward the lowest class index.  Only
the binary one-against-all picks at random, because its error transform
depends on it.  Predictions of the one-against-all variants carry the raw
per-class scores; ECOC and the tree report the class only.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (
    NEGATIVE, POSITIVE, ClassOutOfRange, ConfigError, MulticlassPrediction,
    ReductoError, Regression, TaskKind,
)
from .stack import Layer, register_layer, reject_extra, take_k

# salts keep the draws of different layers independent
_SALT_OAA = 0x0AA


class InvalidCodeMatrix(ReductoError, ValueError):
    pass


class NotAProbabilityVector(ReductoError, ValueError):
    pass


def _check_class(cls: int, k: int):
    if not 0 <= cls < k:
        raise ClassOutOfRange(f"class {cls} outside 0..{k - 1}")


def _argmax(scores) -> int:
    return max(range(len(scores)), key=scores.__getitem__)


def _argmin(scores) -> int:
    return min(range(len(scores)), key=scores.__getitem__)


class OneAgainstAll(Layer):
    """k binary sub-problems, "is it class i?".

    Prediction picks uniformly at random among the classes whose classifier
    says positive, or among all k when none does.  In ``weighted`` mode the
    positive example of every learn call carries ``positive_weight`` times
    the importance, which makes the sub-classifiers quicker to say yes.
    """

    consumes = TaskKind.MULTICLASS
    emits = TaskKind.BINARY

    def __init__(self, k: int, weighted: bool = False, positive_weight: Optional[float] = None):
        self.k = k
        self.num_instances = k
        self.weighted = weighted
        if weighted:
            if positive_weight is None:
                positive_weight = 2.0 * (k - 1) / k
            if positive_weight < 1.0:
                raise ConfigError(f"positive_weight must be >= 1, got {positive_weight}")
        self.positive_weight = positive_weight if weighted else 1.0
        self.name = "woa" if weighted else "oaa"

    @property
    def mode(self) -> str:
        return "weighted" if self.weighted else "binary"

    def params(self):
        if self.weighted and self.positive_weight != 2.0 * (self.k - 1) / self.k:
            return {"k": self.k, "w": self.positive_weight}
        return {"k": self.k}

    def decide(self, scores) -> int:
        positives = [i for i, s in enumerate(scores) if s > 0.0]
        if len(positives) == 1:
            return positives[0]
        if positives:
            return positives[self.rng.randbelow(len(positives), _SALT_OAA)]
        return self.rng.randbelow(self.k, _SALT_OAA)

    def predict(self, ex, below):
        scores = tuple(below.predict(ex, i) for i in range(self.k))
        return MulticlassPrediction(self.decide(scores), scores)

    def learn(self, ex, label, below, weight=1.0):
        c = label.cls
        _check_class(c, self.k)
        pw = weight * self.positive_weight
        scores = tuple(
            below.learn(ex, i, POSITIVE, pw) if i == c else below.learn(ex, i, NEGATIVE, weight)
            for i in range(self.k)
        )
        return MulticlassPrediction(self.decide(scores), scores)


class OaaScores(Layer):
    """One-against-all reduced to squared-loss regression on I(y = i);
    predicts the argmax of the k regressors."""

    name = "oaa_scores"
    consumes = TaskKind.MULTICLASS
    emits = TaskKind.REGRESSION
    _one = Regression(1.0)
    _zero = Regression(0.0)

    def __init__(self, k: int):
        self.k = k
        self.num_instances = k

    def params(self):
        return {"k": self.k}

    def predict(self, ex, below):
        scores = tuple(below.predict(ex, i) for i in range(self.k))
        return MulticlassPrediction(_argmax(scores), scores)

    def learn(self, ex, label, below, weight=1.0):
        c = label.cls
        _check_class(c, self.k)
        one, zero = self._one, self._zero
        scores = tuple(below.learn(ex, i, one if i == c else zero, weight) for i in range(self.k))
        return MulticlassPrediction(_argmax(scores), scores)


class CostSensitiveOAA(Layer):
    """Regress each listed class's cost; predict the argmin."""

    name = "csoaa"
    consumes = TaskKind.COST_SENSITIVE
    emits = TaskKind.REGRESSION

    def __init__(self, k: int):
        self.k = k
        self.num_instances = k

    def params(self):
        return {"k": self.k}

    def predict(self, ex, below):
        scores = tuple(below.predict(ex, i) for i in range(self.k))
        return MulticlassPrediction(_argmin(scores), scores)

    def learn(self, ex, label, below, weight=1.0):
        k = self.k
        for c, _ in label.costs:
            _check_class(c, k)
        scores = [None] * k
        for c, cost in label.costs:
            scores[c] = below.learn(ex, c, Regression(cost), weight)
        for i in range(k):
            if scores[i] is None:
                scores[i] = below.predict(ex, i)
        scores = tuple(scores)
        return MulticlassPrediction(_argmin(scores), scores)


# --------------------------------------------------------------------------
# error-correcting output codes


def exhaustive_code(k: int) -> np.ndarray:
    """All ``2**(k-1) - 1`` distinct bipartitions of k classes, one per row.

    Row ``r`` assigns bit 1 to class 0 and the bits of ``r`` to classes
    ``1..k-1``; the all-ones row is dropped.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    n = 2 ** (k - 1) - 1
    code = np.zeros((n, k), dtype=np.int8)
    code[:, 0] = 1
    for r in range(n):
        for j in range(1, k):
            code[r, j] = (r >> (j - 1)) & 1
    return code


def random_code(k: int, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    for _ in range(10_000):
        code = rng.integers(0, 2, size=(n, k), dtype=np.int8)
        try:
            check_code(code)
        except InvalidCodeMatrix:
            continue
        return code
    raise InvalidCodeMatrix(f"could not draw a valid {n}x{k} code")


def check_code(code: np.ndarray) -> None:
    code = np.asarray(code)
    if code.ndim != 2 or code.shape[0] < 1 or code.shape[1] < 2:
        raise InvalidCodeMatrix(f"code must be an n x k matrix with k >= 2, got shape {code.shape}")
    if not np.isin(code, (0, 1)).all():
        raise InvalidCodeMatrix("code entries must be 0 or 1")
    rows = code.sum(axis=1)
    if np.any(rows == 0) or np.any(rows == code.shape[1]):
        raise InvalidCodeMatrix("code has a constant row")
    if len({col.tobytes() for col in code.T}) != code.shape[1]:
        raise InvalidCodeMatrix("code has two identical columns")


def default_code_length(k: int) -> int:
    return math.ceil(10 * math.log2(k))


def hamming_decode(code: np.ndarray, scores: Sequence[float]) -> int:
    bits = [1 if s > 0.0 else 0 for s in scores]
    dist = [sum(b != code[r][c] for r, b in enumerate(bits)) for c in range(len(code[0]))]
    return _argmin(dist)


def margin_decode(code: np.ndarray, scores: Sequence[float]) -> int:
    dist = [
        sum(abs(s - (2 * code[r][c] - 1)) for r, s in enumerate(scores))
        for c in range(len(code[0]))
    ]
    return _argmin(dist)


class ECOC(Layer):
    """One binary sub-problem per code row; decode to the nearest column.

    With no explicit ``code``: the exhaustive code for k <= 8, else
    ``ceil(10 log2 k)`` random rows drawn with ``code_seed``.  Passing ``n``
    forces a random code of that length.
    """

    name = "ecoc"
    consumes = TaskKind.MULTICLASS
    emits = TaskKind.BINARY

    def __init__(self, k: int, n: Optional[int] = None, decoding: str = "hamming",
                 code: Optional[np.ndarray] = None, code_seed: int = 0):
        if decoding not in ("hamming", "margin"):
            raise ConfigError(f"unknown decoding {decoding!r}")
        self.k = k
        self.decoding = decoding
        self.code_seed = code_seed
        self._explicit = code is not None
        self._n_given = n
        if code is None:
            if n is None and k <= 8:
                code = exhaustive_code(k)
            else:
                code = random_code(k, n if n is not None else default_code_length(k), code_seed)
        code = np.asarray(code, dtype=np.int8)
        check_code(code)
        if code.shape[1] != k:
            raise InvalidCodeMatrix(f"code has {code.shape[1]} columns for k={k}")
        self.code = code
        self._rows = code.tolist()
        self.num_instances = code.shape[0]
        self._decode = hamming_decode if decoding == "hamming" else margin_decode

    def params(self):
        if self._explicit:
            raise ConfigError("an ECOC layer with an explicit code matrix has no config string")
        p = {"k": self.k}
        if self._n_given is not None:
            p["n"] = self._n_given
        if self._n_given is not None or self.k > 8:
            p["seed"] = self.code_seed
        if self.decoding != "hamming":
            p["decode"] = self.decoding
        return p

    def canonical(self):
        if self._explicit:
            return f"ecoc:{self.k},code=explicit"
        return super().canonical()

    def predict(self, ex, below):
        scores = [below.predict(ex, r) for r in range(self.num_instances)]
        return MulticlassPrediction(self._decode(self._rows, scores))

    def learn(self, ex, label, below, weight=1.0):
        c = label.cls
        _check_class(c, self.k)
        scores = [
            below.learn(ex, r, POSITIVE if row[c] else NEGATIVE, weight)
            for r, row in enumerate(self._rows)
        ]
        return MulticlassPrediction(self._decode(self._rows, scores))


# --------------------------------------------------------------------------
# label tree


class LogTree(Layer):
    """Complete binary tree over classes in index order, one binary
    classifier per internal node.

    A node covering classes ``[lo, hi)`` splits at ``lo + ceil((hi-lo)/2)``;
    its classifier says +1 for "right half".  Depth is ``ceil(log2 k)``.
    Nodes are numbered in preorder.
    """

    name = "log_tree"
    consumes = TaskKind.MULTICLASS
    emits = TaskKind.BINARY

    def __init__(self, k: int):
        self.k = k
        self.num_instances = k - 1
        # per node: (split, left child, right child); children >= 0 are nodes,
        # children < 0 encode leaf class -(child + 1)
        self.nodes: list = []
        self._build(0, k)
        self.depth = math.ceil(math.log2(k))

    def _build(self, lo, hi):
        if hi - lo == 1:
            return -(lo + 1)
        node = len(self.nodes)
        self.nodes.append(None)
        mid = lo + (hi - lo + 1) // 2
        left = self._build(lo, mid)
        right = self._build(mid, hi)
        self.nodes[node] = (mid, left, right)
        return node

    def params(self):
        return {"k": self.k}

    def path(self, cls: int):
        """``[(node, direction)]`` from the root to ``cls``'s leaf."""
        out = []
        node = 0
        while node >= 0:
            mid, left, right = self.nodes[node]
            go_right = cls >= mid
            out.append((node, go_right))
            node = right if go_right else left
        return out

    def predict(self, ex, below):
        nodes = self.nodes
        node = 0
        while node >= 0:
            _, left, right = nodes[node]
            node = right if below.predict(ex, node) > 0.0 else left
        return MulticlassPrediction(-(node + 1))

    def learn(self, ex, label, below, weight=1.0):
        c = label.cls
        _check_class(c, self.k)
        out = self.predict(ex, below)
        for node, go_right in self.path(c):
            below.learn(ex, node, POSITIVE if go_right else NEGATIVE, weight)
        return out


# --------------------------------------------------------------------------
# regret transform


def regret_bound_check(p: Sequence[float], f: Sequence[float]) -> Tuple[float, float, float]:
    """Multiclass regret of predicting ``argmax f`` when the class
    probabilities are ``p``, next to the squared-loss regret of ``f`` and the
    bound ``sqrt(2 k avg_sq_regret)``.

    Ties in ``f`` go against the predictor (the worst tied class is taken),
    matching an adversary that controls tie-breaking.

    Returns
    -------
    (multiclass_regret, avg_sq_regret, bound)
    """
    p = [float(v) for v in p]
    f = [float(v) for v in f]
    k = len(p)
    if k < 1 or len(f) != k:
        raise NotAProbabilityVector(f"p and f must be non-empty and of equal length, got {k}, {len(f)}")
    if any(not v >= 0.0 or math.isinf(v) for v in p) or abs(math.fsum(p) - 1.0) > 1e-9:
        raise NotAProbabilityVector(f"{p} is not a probability vector")
    if not all(math.isfinite(v) for v in f):
        raise ValueError("scores must be finite")
    top = max(f)
    mc_regret = max(p) - min(pi for pi, fi in zip(p, f) if fi == top)
    avg_sq = math.fsum((pi - fi) ** 2 for pi, fi in zip(p, f)) / k
    return mc_regret, avg_sq, math.sqrt(2 * k * avg_sq)


def adversarial_scores(p: Sequence[float]) -> np.ndarray:
    """Cheapest scores that make the runner-up class win a tie with the best:
    both get ``(p_best + p_second) / 2``, every other class its true value."""
    p = np.asarray(p, dtype=np.float64)
    order = np.argsort(-p, kind="stable")
    best, second = order[0], order[1]
    f = p.copy()
    f[best] = f[second] = (p[best] + p[second]) / 2
    return f


# --------------------------------------------------------------------------
# registration


def _float(kw, key, default=None):
    if key not in kw:
        return default
    try:
        return float(kw.pop(key))
    except ValueError:
        raise ConfigError(f"{key} must be a number") from None


@register_layer("oaa")
def _make_oaa(pos, kw):
    k = take_k(pos, kw)
    reject_extra("oaa", pos, kw)
    return OneAgainstAll(k)


@register_layer("woa")
def _make_woa(pos, kw):
    k = take_k(pos, kw)
    w = _float(kw, "w")
    reject_extra("woa", pos, kw)
    return OneAgainstAll(k, weighted=True, positive_weight=w)


@register_layer("oaa_scores")
def _make_oaa_scores(pos, kw):
    k = take_k(pos, kw)
    reject_extra("oaa_scores", pos, kw)
    return OaaScores(k)


@register_layer("csoaa")
def _make_csoaa(pos, kw):
    k = take_k(pos, kw)
    reject_extra("csoaa", pos, kw)
    return CostSensitiveOAA(k)


@register_layer("ecoc")
def _make_ecoc(pos, kw):
    k = take_k(pos, kw)
    n = int(kw.pop("n")) if "n" in kw else None
    seed = int(kw.pop("seed", 0))
    decoding = kw.pop("decode", "hamming")
    reject_extra("ecoc", pos, kw)
    return ECOC(k, n=n, decoding=decoding, code_seed=seed)


@register_layer("log_tree")
def _make_log_tree(pos, kw):
    k = take_k(pos, kw)
    reject_extra("log_tree", pos, kw)
    return LogTree(k)


def oaa_predicted_classes(stack, examples) -> list:
    """Convenience: top-level predicted classes, stepping the RNG per example."""
    out = []
    for ex in examples:
        out.append(stack.predict(ex).cls)
        stack.step()
    return out


__all__ = [
    "OneAgainstAll", "OaaScores", "CostSensitiveOAA", "ECOC", "LogTree",
    "InvalidCodeMatrix", "NotAProbabilityVector", "exhaustive_code", "random_code",
    "check_code", "hamming_decode", "margin_decode", "regret_bound_check",
    "adversarial_scores",
]
