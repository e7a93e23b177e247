"""Online linear base learner over a striped :class:`WeightStore`.

Two entry points, ``predict(example, offset)`` and ``learn(example, offset)``.
``predict`` never touches state.  ``learn`` returns exactly what ``predict``
would have returned just before the call, then takes one gradient step.

Update rules
------------
With ``g`` the loss derivative at the current score, ``h`` the importance
and ``x_f`` a feature value, each feature's step is::

    plain       dw_f = -h * g * x_f * lr * t**(-power_t)
    adaptive    G_f += h * (g * x_f)**2 ;  dw_f = -h * g * x_f * lr / sqrt(G_f)
    normalized  x_f is replaced by x_f / N_f, and the step is divided by N_f,
                with N_f the running max |x_f| seen at that slot

``t`` counts updates of the model at this offset, so interleaved models decay
independently.  With ``invariant`` (squared loss only) the ``h``-weighted step
is replaced by the exact solution of the gradient flow over ``[0, h]``, which
moves the residual ``s - y`` to ``(s - y) * exp(-2 h q)`` with
``q = sum_f x_f * dw_f/d(-g h)``; it never overshoots the target however
large ``h`` is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .core import Binary, ConfigError, MismatchedLabel, Regression
from .weights import OffsetOutOfRange, WeightStore

LOSSES = ("squared", "logistic")


@dataclass
class BaseConfig:
    learning_rate: float = 0.5
    loss: str = "squared"
    adaptive: bool = False
    normalized: bool = False
    invariant: bool = False
    power_t: float = 0.5
    bias: bool = True

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; choose from {LOSSES}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.power_t <= 1.0:
            raise ConfigError(f"power_t must be in [0, 1], got {self.power_t}")
        if self.invariant and self.loss != "squared":
            raise ConfigError("importance-invariant updates are defined for squared loss only")


def loss_gradient(loss: str, score: float, y: float) -> float:
    """Derivative of the loss with respect to the score."""
    if loss == "squared":
        return 2.0 * (score - y)
    margin = y * score
    if margin > 0:
        e = math.exp(-margin)
        return -y * e / (1.0 + e)
    return -y / (1.0 + math.exp(margin))


def loss_value(loss: str, score: float, y: float) -> float:
    if loss == "squared":
        return (score - y) ** 2
    margin = y * score
    if margin > 0:
        return math.log1p(math.exp(-margin))
    return -margin + math.log1p(math.exp(margin))


def sigmoid(score: float) -> float:
    if score >= 0:
        return 1.0 / (1.0 + math.exp(-score))
    e = math.exp(score)
    return e / (1.0 + e)


class BaseLearner:
    """Linear model at the bottom of every reduction stack.

    ``update_count`` counts learn calls with positive importance;
    ``offset_updates[m]`` counts those that hit model ``m``.  ``predict_calls``
    and ``learn_calls`` are plain call counters used for instrumentation.
    """

    def __init__(self, config: BaseConfig, store: WeightStore):
        if config.adaptive and store.adaptive_state is None:
            raise ConfigError("store was built without adaptive state")
        if config.normalized and store.norm_state is None:
            raise ConfigError("store was built without normalization state")
        self.config = config
        self.store = store
        self.update_count = 0
        self.offset_updates = [0] * store.stride
        self.predict_calls = 0
        self.learn_calls = 0
        self._squared = config.loss == "squared"

    @classmethod
    def with_new_store(cls, config: BaseConfig, bits: int, stride: int = 1, **kwargs):
        store = WeightStore(bits, stride, adaptive=config.adaptive,
                            normalized=config.normalized, **kwargs)
        return cls(config, store)

    def _check_offset(self, offset):
        if not 0 <= offset < self.store.stride:
            raise OffsetOutOfRange(f"offset {offset} not in [0, {self.store.stride})")

    def predict(self, ex, offset: int = 0) -> float:
        """Raw linear score of model ``offset`` on ``ex``."""
        self.predict_calls += 1
        store = self.store
        stride = store.stride
        if offset >= stride or offset < 0:
            self._check_offset(offset)
        mask = store.mask
        w = store.weights
        s = 0.0
        for fid, x in ex.features:
            s += w[(fid & mask) * stride + offset] * x
        if self.config.bias:
            s += w[mask * stride + offset]
        return s

    def predict_probability(self, ex, offset: int = 0) -> float:
        """Logistic link applied to the score (meaningful for logistic loss)."""
        return sigmoid(self.predict(ex, offset))

    def target(self, label) -> float:
        if isinstance(label, Regression):
            if not self._squared:
                raise MismatchedLabel("logistic loss needs Binary labels, got Regression")
            return label.target
        if isinstance(label, Binary):
            return float(label.y)
        raise MismatchedLabel(f"base learner cannot learn from {type(label).__name__} labels")

    def learn(self, ex, offset: int = 0, label=None, weight: float = 1.0) -> float:
        """One online update of model ``offset``; returns the pre-update score.

        ``label`` defaults to ``ex.label``; ``weight`` multiplies
        ``ex.importance``.
        """
        self.learn_calls += 1
        cfg = self.config
        store = self.store
        stride = store.stride
        if offset >= stride or offset < 0:
            self._check_offset(offset)
        y = self.target(ex.label if label is None else label)
        mask = store.mask
        w = store.weights

        idx = [(fid & mask) * stride + offset for fid, _ in ex.features]
        xs = [x for _, x in ex.features]
        if cfg.bias:
            idx.append(mask * stride + offset)
            xs.append(1.0)
        s = 0.0
        for i, x in zip(idx, xs):
            s += w[i] * x

        h = ex.importance * weight
        if h <= 0.0:
            return s
        self.update_count += 1
        self.offset_updates[offset] += 1
        g = 2.0 * (s - y) if self._squared else loss_gradient(cfg.loss, s, y)
        if g == 0.0:
            return s

        # u: update direction per weight (normalized feature value);
        # r: per-weight rate so that dw = -(g h) * u * r in the small-step form.
        if cfg.normalized:
            nrm = store.norm_state
            us = []
            scale = []
            for i, x in zip(idx, xs):
                a = x if x >= 0 else -x
                n = nrm[i]
                if a > n:
                    nrm[i] = n = a
                if n > 0.0:
                    us.append(x / n)
                    scale.append(1.0 / n)
                else:
                    us.append(0.0)
                    scale.append(0.0)
        else:
            us = xs
            scale = None

        if cfg.adaptive:
            acc = store.adaptive_state
            lr = cfg.learning_rate
            rates = []
            for i, u in zip(idx, us):
                gu = g * u
                G = acc[i] + h * gu * gu
                acc[i] = G
                rates.append(lr / math.sqrt(G) if G > 0.0 else 0.0)
        else:
            t = self.offset_updates[offset]
            r = cfg.learning_rate * (t ** -cfg.power_t if cfg.power_t else 1.0)
            rates = [r] * len(idx)
        if scale is not None:
            rates = [r * c for r, c in zip(rates, scale)]

        if cfg.invariant:
            q = 0.0
            for x, u, r in zip(xs, us, rates):
                q += x * u * r
            if q <= 0.0:
                return s
            # exact flow of ds/dtau = -2 q (s - y) over tau in [0, h]
            mult = -(s - y) * (-math.expm1(-2.0 * h * q)) / q
        else:
            mult = -g * h
        for i, u, r in zip(idx, us, rates):
            w[i] += mult * u * r
        return s


def base_predict(learner: BaseLearner, e, offset: int = 0) -> float:
    return learner.predict(e, offset)


def base_learn(learner: BaseLearner, e, offset: int = 0) -> float:
    return learner.learn(e, offset)


def update_step(g: float, x: float, *, learning_rate: float, importance: float = 1.0,
                t: int = 1, power_t: float = 0.5, adaptive_acc: Optional[float] = None,
                norm_max: Optional[float] = None) -> float:
    """Single-feature step of the non-invariant rule, for inspection.

    ``adaptive_acc`` is the accumulator *before* this example (pass ``None``
    for a plain decayed rate); ``norm_max`` the running max |x| *before* this
    example (``None`` disables normalization).
    """
    if g == 0.0 or x == 0.0:
        return 0.0
    scale = 1.0
    u = x
    if norm_max is not None:
        n = max(norm_max, abs(x))
        u = x / n
        scale = 1.0 / n
    if adaptive_acc is not None:
        G = adaptive_acc + importance * (g * u) ** 2
        rate = learning_rate / math.sqrt(G)
    else:
        rate = learning_rate * (t ** -power_t if power_t else 1.0)
    return -importance * g * u * rate * scale
