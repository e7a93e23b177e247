"""Composing reductions into a stack over one base learner.

A stack string such as ``"oaa:3|base"`` or ``"cb:4|csoaa:4|base"`` names
layers top to bottom.  Each layer declares how many sub-problems it creates
(``num_instances``); the base learner's store gets a stride equal to the
product of those counts.  When layer ``j`` addresses its sub-problem ``i``,
the offset passed downward grows by ``i`` times the product of the instance
counts of every layer below ``j``, so every path through the stack lands on a
distinct model.
"""
from __future__ import annotations

import hashlib
import math
from typing import Callable, Dict, List, Optional, Sequence

from .base import BaseConfig, BaseLearner
from .core import (
    LABEL_TYPES, UNLABELED, ConfigError, MismatchedLabel, ReductoError,
    ScalarPrediction, SequenceExample, TaskKind,
)
from .weights import DEFAULT_BITS, DEFAULT_MAX_ENTRIES, WeightStore


class UnknownLayer(ReductoError, ValueError):
    pass


class IncompatibleChain(ReductoError, ValueError):
    pass


_M64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


class StackRandom:
    """Counter-based randomness shared by every layer of one stack.

    A draw is a hash of ``(seed, ticket, *keys)``.  Reading a draw does not
    change anything, so predictions stay pure; the ticket advances once per
    example consumed (every ``learn``, or an explicit :meth:`advance`), which
    gives each example fresh tie-breaking.
    """

    __slots__ = ("seed", "ticket", "_base")

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.ticket = 0
        self._base = _splitmix64(seed & _M64)

    def bits(self, *keys: int) -> int:
        h = _splitmix64(self._base ^ self.ticket)
        for k in keys:
            h = _splitmix64(h ^ (k & _M64))
        return h

    def uniform(self, *keys: int) -> float:
        return (self.bits(*keys) >> 11) * (1.0 / 9007199254740992.0)

    def randbelow(self, n: int, *keys: int) -> int:
        return (self.bits(*keys) * n) >> 64

    def advance(self) -> None:
        self.ticket += 1


class Below:
    """Handle a layer uses to reach its own sub-problems.

    ``predict(ex, i)`` / ``learn(ex, i, label, weight)`` route to the next
    stage with offset ``offset + i * increment``.
    """

    __slots__ = ("_stage", "_offset", "_inc")

    def __init__(self, stage, offset: int, increment: int):
        self._stage = stage
        self._offset = offset
        self._inc = increment

    def predict(self, ex, i: int = 0):
        return self._stage.predict(ex, self._offset + i * self._inc)

    def learn(self, ex, i: int = 0, label=None, weight: float = 1.0):
        return self._stage.learn(ex, self._offset + i * self._inc, label, weight)


class _BaseStage:
    __slots__ = ("base",)

    def __init__(self, base: BaseLearner):
        self.base = base

    def predict(self, ex, offset):
        return self.base.predict(ex, offset)

    def learn(self, ex, offset, label, weight):
        return self.base.learn(ex, offset, label, weight)


class _LayerStage:
    __slots__ = ("layer", "next", "increment")

    def __init__(self, layer, next_stage, increment):
        self.layer = layer
        self.next = next_stage
        self.increment = increment

    def predict(self, ex, offset):
        return self.layer.predict(ex, Below(self.next, offset, self.increment))

    def learn(self, ex, offset, label, weight):
        if label is None:
            label = ex.label
        return self.layer.learn(ex, label, Below(self.next, offset, self.increment), weight)


class Layer:
    """A reduction: one problem type in, another (plus a decoder) out.

    Subclasses set ``name``, ``consumes``, ``emits`` and ``num_instances`` and
    implement ``predict(ex, below)`` and ``learn(ex, label, below, weight)``.
    ``predict`` must not change any state.  ``learn`` must return what
    ``predict`` would have returned immediately before the call.
    """

    name = "layer"
    consumes: TaskKind
    emits: TaskKind
    num_instances = 1
    rng: StackRandom

    def bind(self, rng: StackRandom) -> None:
        self.rng = rng

    def params(self) -> Dict[str, object]:
        """Parameters in canonical order; ``k`` (if present) is positional."""
        return {}

    def canonical(self) -> str:
        params = self.params()
        if not params:
            return self.name
        parts = []
        for key, value in params.items():
            text = _format_param(value)
            parts.append(text if key == "k" else f"{key}={text}")
        return f"{self.name}:{','.join(parts)}"

    def predict(self, ex, below: Below):
        raise NotImplementedError

    def learn(self, ex, label, below: Below, weight: float = 1.0):
        raise NotImplementedError


def _format_param(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# --------------------------------------------------------------------------
# registry and config grammar

LayerFactory = Callable[[List[str], Dict[str, str]], Layer]
_REGISTRY: Dict[str, LayerFactory] = {}


def register_layer(name: str):
    def deco(factory):
        _REGISTRY[name] = factory
        return factory
    return deco


def _ensure_registered():
    # the layer modules register themselves on import
    from . import bandit, multiclass, search  # noqa: F401


def parse_stack_config(config: str):
    """Split a stack string into ``[(name, positional_args, keyword_args), ...]``."""
    layers = []
    for chunk in config.lower().split("|"):
        chunk = "".join(chunk.split())
        if not chunk:
            raise IncompatibleChain(f"empty layer in stack config {config!r}")
        name, _, rest = chunk.partition(":")
        pos, kw = [], {}
        if rest:
            for arg in rest.split(","):
                if "=" in arg:
                    key, _, value = arg.partition("=")
                    kw[key] = value
                elif kw:
                    raise ConfigError(f"positional argument {arg!r} after keywords in {chunk!r}")
                else:
                    pos.append(arg)
        layers.append((name, pos, kw))
    return layers


BASE_DEFAULTS = BaseConfig()


def _base_params(cfg: BaseConfig) -> str:
    parts = []
    if cfg.loss != "squared":
        parts.append(f"loss={cfg.loss}")
    if not cfg.bias:
        parts.append("bias=0")
    return "base" + (":" + ",".join(parts) if parts else "")


def _apply_base_params(cfg: BaseConfig, pos, kw) -> BaseConfig:
    if pos:
        raise ConfigError(f"base takes no positional parameters, got {pos}")
    kwargs = {}
    for key, value in kw.items():
        if key == "loss":
            kwargs["loss"] = value
        elif key == "bias":
            kwargs["bias"] = value not in ("0", "false", "no")
        else:
            raise ConfigError(f"unknown base parameter {key!r}")
    if not kwargs:
        return cfg
    merged = {**cfg.__dict__, **kwargs}
    return BaseConfig(**merged)


class ReductionStack:
    """Layers over a base learner sharing one striped store and one RNG."""

    def __init__(self, layers: Sequence[Layer], base: BaseLearner, rng: StackRandom):
        self.layers = list(layers)
        self.base = base
        self.rng = rng
        self.store = base.store
        self.total_stride = math.prod(l.num_instances for l in self.layers)
        if self.total_stride != self.store.stride:
            raise IncompatibleChain(
                f"store stride {self.store.stride} != product of instances {self.total_stride}"
            )
        stage = _BaseStage(base)
        below_count = 1
        for layer in reversed(self.layers):
            stage = _LayerStage(layer, stage, below_count)
            below_count *= layer.num_instances
        self._top = stage
        self.config = "|".join([l.canonical() for l in self.layers] + [_base_params(base.config)])
        self.store.stack_config = self.config
        self.learn_calls = 0
        if self.layers:
            self.task = self.layers[0].consumes
        else:
            self.task = TaskKind.BINARY if base.config.loss == "logistic" else TaskKind.REGRESSION

    def __repr__(self):
        return f"ReductionStack({self.config!r}, bits={self.store.bits})"

    @property
    def k(self) -> Optional[int]:
        return getattr(self.layers[0], "k", None) if self.layers else None

    def _label_ok(self, label):
        if self.task is TaskKind.SEQUENCE:
            return isinstance(label, tuple)
        types = LABEL_TYPES[self.task]
        if not self.layers:
            types = LABEL_TYPES[TaskKind.BINARY] + LABEL_TYPES[TaskKind.REGRESSION]
        return isinstance(label, types)

    def predict(self, ex):
        """Top-level prediction; changes nothing."""
        if not self.layers:
            return ScalarPrediction(self.base.predict(ex, 0))
        return self._top.predict(ex, 0)

    def learn(self, ex):
        """Train on one labeled example; returns the pre-update prediction."""
        label = ex.label
        if label is UNLABELED or not self._label_ok(label):
            raise MismatchedLabel(
                f"{type(label).__name__} label given to a {self.task.value} stack"
            )
        self.learn_calls += 1
        if not self.layers:
            out = ScalarPrediction(self.base.learn(ex, 0, label, 1.0))
        else:
            out = self._top.learn(ex, 0, label, 1.0)
        self.rng.advance()
        return out

    def step(self) -> None:
        """Advance the tie-breaking stream without learning (use between
        test-time predictions so identical examples get fresh draws)."""
        self.rng.advance()

    def instance_predictions(self, ex) -> list:
        """What the top layer's sub-problems say about ``ex``, in instance order."""
        if not self.layers:
            return [self.base.predict(ex, 0)]
        below = Below(self._top.next, 0, self._top.increment)
        return [below.predict(ex, i) for i in range(self.layers[0].num_instances)]

    def digest(self) -> str:
        """Hash of every piece of mutable state (store, counters, RNG ticket)."""
        h = hashlib.blake2b(digest_size=16)
        h.update(self.store.digest().encode())
        h.update(repr((self.base.update_count, self.base.offset_updates, self.rng.ticket)).encode())
        return h.hexdigest()


def _check_chain(layers: Sequence[Layer], base_cfg: BaseConfig):
    for upper, lower in zip(layers, layers[1:]):
        if upper.emits is not lower.consumes:
            raise IncompatibleChain(
                f"{upper.name} emits {upper.emits.value} but {lower.name} consumes {lower.consumes.value}"
            )
        ku, kl = getattr(upper, "k", None), getattr(lower, "k", None)
        if ku is not None and kl is not None and ku != kl:
            raise IncompatibleChain(f"{upper.name} has k={ku} but {lower.name} has k={kl}")
    if layers:
        bottom = layers[-1]
        accepted = {TaskKind.BINARY}
        if base_cfg.loss == "squared":
            accepted.add(TaskKind.REGRESSION)
        if bottom.emits not in accepted:
            raise IncompatibleChain(
                f"{bottom.name} emits {bottom.emits.value}; {base_cfg.loss} base learner "
                f"accepts {sorted(t.value for t in accepted)}"
            )


def build_stack(config: str, bits: int = DEFAULT_BITS, base_config: Optional[BaseConfig] = None,
                seed: int = 0, max_entries: int = DEFAULT_MAX_ENTRIES) -> ReductionStack:
    """Parse ``config``, allocate a store of the right stride, wire the layers.

    ``base_config`` supplies learning-rate flags; ``loss``/``bias`` given in
    the config string's ``base`` entry override it.
    """
    _ensure_registered()
    parsed = parse_stack_config(config)
    if parsed[-1][0] != "base":
        raise IncompatibleChain(f"stack config {config!r} must end in 'base'")
    base_cfg = _apply_base_params(base_config or BaseConfig(), parsed[-1][1], parsed[-1][2])
    rng = StackRandom(seed)
    layers = []
    for name, pos, kw in parsed[:-1]:
        if name == "base":
            raise IncompatibleChain("'base' may only appear last")
        factory = _REGISTRY.get(name)
        if factory is None:
            raise UnknownLayer(f"unknown layer {name!r}; known: {sorted(_REGISTRY)}")
        try:
            layer = factory(pos, kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ReductoError):
                raise
            raise ConfigError(f"bad parameters for {name!r}: {exc}") from None
        layer.bind(rng)
        layers.append(layer)
    _check_chain(layers, base_cfg)
    stride = math.prod(l.num_instances for l in layers)
    store = WeightStore(bits, stride, adaptive=base_cfg.adaptive,
                        normalized=base_cfg.normalized, max_entries=max_entries)
    return ReductionStack(layers, BaseLearner(base_cfg, store), rng)


def stack_predict(stack: ReductionStack, e):
    return stack.predict(e)


def stack_learn(stack: ReductionStack, e):
    return stack.learn(e)


def _int(value: str, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None


def take_k(pos: List[str], kw: Dict[str, str], *aliases: str) -> int:
    """Class count from the first positional argument or a keyword alias."""
    if pos:
        k = _int(pos.pop(0), "k")
    else:
        for key in ("k",) + aliases:
            if key in kw:
                k = _int(kw.pop(key), key)
                break
        else:
            raise ConfigError("missing class count k")
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    return k


def reject_extra(name: str, pos, kw):
    if pos or kw:
        raise ConfigError(f"unexpected parameters for {name}: {pos + [f'{a}={b}' for a, b in kw.items()]}")
