"""The striped weight table.

Every sub-model of a reduction stack lives in one dense array.  For a stack
with ``stride`` models, the weight of feature ``f`` in model ``m`` sits at
``(f mod 2**bits) * stride + m``, so all models' weights for one feature are
adjacent in memory.
"""
from __future__ import annotations

import hashlib
import io
import os
from array import array
from typing import Callable, Optional, TextIO, Union

import numpy as np

from .core import ReductoError

MAGIC = "reducto-model v1"
DEFAULT_BITS = 18
DEFAULT_MAX_ENTRIES = 1 << 28


class CapacityError(ReductoError, MemoryError):
    pass


class OffsetOutOfRange(ReductoError, IndexError):
    pass


class FormatError(ReductoError, ValueError):
    pass


class TruncatedError(FormatError):
    pass


def _zeros(n: int) -> array:
    return array("d", bytes(8 * n))


class WeightStore:
    """Dense ``2**bits x stride`` table of float64 weights.

    Auxiliary per-weight state used by the update rules (AdaGrad accumulators,
    running feature scales) is striped identically and only allocated when
    asked for.

    Parameters
    ----------
    bits : int
        log2 of the number of feature slots, in ``[1, 31]``.
    stride : int
        Number of interleaved models.
    adaptive, normalized : bool
        Allocate the gradient-square accumulator / the max-abs-feature table.
    max_entries : int
        Refuse to allocate tables with more entries than this.
    """

    __slots__ = (
        "bits", "stride", "mask", "weights", "adaptive_state", "norm_state",
        "stack_config",
    )

    def __init__(self, bits: int, stride: int, *, adaptive: bool = False,
                 normalized: bool = False, max_entries: int = DEFAULT_MAX_ENTRIES):
        if not 1 <= bits <= 31:
            raise ValueError(f"bits must be in [1, 31], got {bits}")
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        size = (1 << bits) * stride
        if size > max_entries:
            raise CapacityError(
                f"2**{bits} x {stride} = {size} weights exceeds the cap of {max_entries}"
            )
        self.bits = bits
        self.stride = stride
        self.mask = (1 << bits) - 1
        self.weights = _zeros(size)
        self.adaptive_state = _zeros(size) if adaptive else None
        self.norm_state = _zeros(size) if normalized else None
        self.stack_config: Optional[str] = None

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"WeightStore(bits={self.bits}, stride={self.stride})"

    def slot(self, feature_id: int, offset: int) -> int:
        if not 0 <= offset < self.stride:
            raise OffsetOutOfRange(f"offset {offset} not in [0, {self.stride})")
        return (feature_id & self.mask) * self.stride + offset

    @property
    def bias_id(self) -> int:
        return self.mask

    def weight_at(self, feature_id: int, offset: int) -> float:
        return self.weights[self.slot(feature_id, offset)]

    def foreach_feature(self, features, offset: int,
                        visitor: Callable[[int, float], None], bias: bool = True) -> None:
        """Call ``visitor(slot, value)`` for each feature, then for the bias.

        ``features`` may be an :class:`~reducto.core.Example` or a plain
        sequence of features.  The visitor reads or writes ``self.weights[slot]``.
        """
        if not 0 <= offset < self.stride:
            raise OffsetOutOfRange(f"offset {offset} not in [0, {self.stride})")
        features = getattr(features, "features", features)
        mask, stride = self.mask, self.stride
        for fid, value in features:
            visitor((fid & mask) * stride + offset, value)
        if bias:
            visitor(mask * stride + offset, 1.0)

    def as_numpy(self) -> np.ndarray:
        """Zero-copy ``(2**bits, stride)`` view of the weights."""
        return np.frombuffer(self.weights, dtype=np.float64).reshape(-1, self.stride)

    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(memoryview(self.weights))
        for extra in (self.adaptive_state, self.norm_state):
            if extra is not None:
                h.update(memoryview(extra))
        return h.hexdigest()

    def nonzero(self):
        w = self.as_numpy().reshape(-1)
        idx = np.flatnonzero(w)
        return idx, w[idx]


def new_store(bits: int, stride: int, **kwargs) -> WeightStore:
    return WeightStore(bits, stride, **kwargs)


def weight_at(store: WeightStore, feature_id: int, offset: int) -> float:
    return store.weight_at(feature_id, offset)


def foreach_feature(store: WeightStore, example, offset: int, visitor, bias: bool = True) -> None:
    store.foreach_feature(example, offset, visitor, bias=bias)


# --------------------------------------------------------------------------
# persistence

PathOrFile = Union[str, os.PathLike, TextIO]


def save_weights(store: WeightStore, sink: PathOrFile, stack: Optional[str] = None) -> None:
    """Write the text model format: a header, a blank line, then one
    ``slot:weight`` line per nonzero weight."""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii") as fh:
            save_weights(store, fh, stack)
        return
    stack = stack if stack is not None else (store.stack_config or "")
    sink.write(f"{MAGIC}\nbits {store.bits}\nstride {store.stride}\nstack {stack}\n\n")
    idx, vals = store.nonzero()
    w = store.weights
    sink.write("".join(f"{i}:{w[i]!r}\n" for i in idx.tolist()))
    sink.write("end\n")


def _read_header(fh):
    first = fh.readline()
    if not first:
        raise TruncatedError("empty model file")
    if first.rstrip("\n") != MAGIC:
        raise FormatError(f"bad model header {first.rstrip()!r}, expected {MAGIC!r}")
    fields = {}
    for key in ("bits", "stride", "stack"):
        line = fh.readline()
        if not line:
            raise TruncatedError(f"model file ends before the {key!r} header")
        name, _, value = line.rstrip("\n").partition(" ")
        if name != key:
            raise FormatError(f"expected header {key!r}, got {line.rstrip()!r}")
        fields[key] = value
    if fh.readline().strip() != "":
        raise FormatError("missing blank line after model header")
    try:
        return int(fields["bits"]), int(fields["stride"]), fields["stack"]
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def load_weights(source: PathOrFile, max_entries: int = DEFAULT_MAX_ENTRIES) -> WeightStore:
    """Inverse of :func:`save_weights`.  The stack string is kept on
    ``store.stack_config``."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="ascii") as fh:
            return load_weights(fh, max_entries)
    bits, stride, stack = _read_header(source)
    store = WeightStore(bits, stride, max_entries=max_entries)
    store.stack_config = stack
    w = store.weights
    n = len(w)
    for lineno, line in enumerate(source, start=6):
        line = line.strip()
        if line == "end":
            return store
        slot, sep, value = line.partition(":")
        try:
            i = int(slot)
            v = float(value)
        except ValueError:
            raise FormatError(f"line {lineno}: bad weight record {line!r}") from None
        if not sep or not 0 <= i < n:
            raise FormatError(f"line {lineno}: bad weight record {line!r}")
        w[i] = v
    raise TruncatedError("model file ends without the 'end' marker")


def dumps(store: WeightStore, stack: Optional[str] = None) -> str:
    buf = io.StringIO()
    save_weights(store, buf, stack)
    return buf.getvalue()


def loads(text: str) -> WeightStore:
    return load_weights(io.StringIO(text))
