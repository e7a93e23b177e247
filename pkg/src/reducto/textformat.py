"""Line-oriented example format.

::

    <label> [<importance>] ['<tag>] | <feature>[:<value>] ...

Labels by task (classes and actions are 1-based on the wire)::

    binary            +1 / -1
    regression        3.25
    multiclass        3
    cost_sensitive    1:0.5 3:0.0
    contextual_bandit 2:0.2:0.5        action:cost:probability, cost = 1 - reward

A line starting with ``|`` is unlabeled.  Feature names are hashed with
64-bit FNV-1a; a name written ``#<digits>`` is taken as an already-hashed id
(this is what :func:`format_example` emits, so parse/format round-trips).

Sequence files hold one position per line (``<tag> | features``) and end each
sequence with a blank line.
"""
from __future__ import annotations

import math
from typing import Iterable, Iterator, List, Optional, Tuple

from .core import (
    UNLABELED, Binary, ContextualBandit, CostSensitive, Example, Feature,
    InvalidProbability, MismatchedLabel, Multiclass, Regression, ReductoError,
    SequenceExample, TaskKind,
)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_M64 = (1 << 64) - 1


class ParseError(ReductoError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


def fnv1a_64(data) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _M64
    return h


_hash_cache: dict = {}


def hash_feature(name: str) -> int:
    h = _hash_cache.get(name)
    if h is None:
        if name.startswith("#") and name[1:].isdigit():
            h = int(name[1:])
        else:
            h = fnv1a_64(name)
        if len(_hash_cache) < 1_000_000:
            _hash_cache[name] = h
    return h


def affix_features(name: str, value: float) -> List[Tuple[str, float]]:
    """Two- and three-character prefixes and suffixes of a token."""
    out = []
    for n in (2, 3):
        if len(name) > n:
            out.append((f"^{n}={name[:n]}", value))
            out.append((f"${n}={name[-n:]}", value))
    return out


def _parse_features(text: str, line, col0, affixes=False) -> Tuple[Feature, ...]:
    feats = []
    col = col0
    for tok in text.split():
        col = text.find(tok, col - col0) + col0
        name, sep, value = tok.rpartition(":") if ":" in tok else (tok, "", "")
        if sep:
            try:
                v = float(value)
            except ValueError:
                raise ParseError(f"bad feature value {value!r}", line, col + len(name) + 1) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite feature value {value!r}", line, col + len(name) + 1)
        else:
            v = 1.0
        if not name:
            raise ParseError(f"empty feature name in {tok!r}", line, col)
        feats.append(Feature(hash_feature(name), v))
        if affixes:
            feats.extend(Feature(hash_feature(n), x) for n, x in affix_features(name, v))
        col += len(tok)
    return tuple(feats)


def _parse_class(tok, line, col, what="class") -> int:
    try:
        c = int(tok)
    except ValueError:
        raise ParseError(f"bad {what} {tok!r}", line, col) from None
    if c < 1:
        raise ParseError(f"{what} must be >= 1 (1-based), got {c}", line, col)
    return c - 1


def _parse_float(tok, line, col, what):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"bad {what} {tok!r}", line, col) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite {what} {tok!r}", line, col)
    return v


def _parse_label(tokens, task: TaskKind, line):
    """Consume label tokens; return (label, remaining (tok, col) pairs)."""
    if task is TaskKind.COST_SENSITIVE:
        costs = []
        while tokens and ":" in tokens[0][0]:
            tok, col = tokens.pop(0)
            c, _, cost = tok.partition(":")
            cls = _parse_class(c, line, col)
            v = _parse_float(cost, line, col + len(c) + 1, "cost")
            if v < 0:
                raise ParseError(f"negative cost {v}", line, col)
            costs.append((cls, v))
        if not costs:
            raise ParseError("missing cost-sensitive label", line, 1)
        try:
            return CostSensitive(tuple(costs)), tokens
        except (MismatchedLabel, ValueError) as exc:
            raise ParseError(str(exc), line, 1) from None

    tok, col = tokens.pop(0)
    if task is TaskKind.MULTICLASS or task is TaskKind.SEQUENCE:
        return Multiclass(_parse_class(tok, line, col)), tokens
    if task is TaskKind.BINARY:
        if tok in ("1", "+1", "1.0", "+1.0"):
            return Binary(1), tokens
        if tok in ("-1", "-1.0"):
            return Binary(-1), tokens
        raise ParseError(f"binary label must be +1 or -1, got {tok!r}", line, col)
    if task is TaskKind.REGRESSION:
        return Regression(_parse_float(tok, line, col, "target")), tokens
    if task is TaskKind.CONTEXTUAL_BANDIT:
        parts = tok.split(":")
        if len(parts) != 3:
            raise ParseError(f"bandit label must be action:cost:probability, got {tok!r}", line, col)
        a = _parse_class(parts[0], line, col, "action")
        cost = _parse_float(parts[1], line, col, "cost")
        p = _parse_float(parts[2], line, col, "probability")
        if not 0.0 <= cost <= 1.0:
            raise ParseError(f"cost {cost} outside [0, 1] (reward = 1 - cost)", line, col)
        if not 0.0 < p <= 1.0:
            raise ParseError(f"probability {p} outside (0, 1]", line, col)
        return ContextualBandit(a, 1.0 - cost, p), tokens
    raise ParseError(f"no line label format for task {task.value}", line, col)


def _split_line(text: str, line):
    bar = text.find("|")
    if bar < 0:
        raise ParseError("missing '|' separating label from features", line, len(text) + 1)
    head = text[:bar]
    tokens = []
    pos = 0
    for tok in head.split():
        pos = head.find(tok, pos)
        tokens.append((tok, pos + 1))
        pos += len(tok)
    return tokens, text[bar + 1:], bar + 2


def parse_line(text: str, task: TaskKind, line: Optional[int] = None,
               affixes: bool = False) -> Example:
    """Parse one example line for ``task``.  Raises :class:`ParseError`."""
    text = text.rstrip("\r\n")
    tokens, feat_text, fcol = _split_line(text, line)
    feats = _parse_features(feat_text, line, fcol, affixes)
    if not tokens:
        return Example(feats)
    label, rest = _parse_label(tokens, task, line)
    importance = 1.0
    tag = None
    if rest and not rest[0][0].startswith("'"):
        tok, col = rest.pop(0)
        importance = _parse_float(tok, line, col, "importance")
        if importance <= 0:
            raise ParseError(f"importance must be positive, got {importance}", line, col)
    if rest and rest[0][0].startswith("'"):
        tag = rest.pop(0)[0][1:]
    if rest:
        tok, col = rest[0]
        raise ParseError(f"unexpected token {tok!r} before '|'", line, col)
    return Example(feats, label, importance, tag)


def iter_examples(lines: Iterable[str], task: TaskKind, affixes: bool = False) -> Iterator[Example]:
    for n, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        yield parse_line(text, task, n, affixes)


def iter_sequences(lines: Iterable[str], affixes: bool = False) -> Iterator[SequenceExample]:
    """Group position lines into sequences separated by blank lines.

    A sequence whose lines are all unlabeled has ``gold = None``; mixing
    labeled and unlabeled positions is an error.
    """
    tokens, gold, first = [], [], None
    for n, text in enumerate(lines, start=1):
        if not text.strip():
            if tokens:
                yield _finish_sequence(tokens, gold, first)
                tokens, gold = [], []
            continue
        if not tokens:
            first = n
        ex = parse_line(text, TaskKind.SEQUENCE, n, affixes)
        tokens.append(ex.features)
        gold.append(ex.label.cls if ex.label is not UNLABELED else None)
    if tokens:
        yield _finish_sequence(tokens, gold, first)


def _finish_sequence(tokens, gold, first_line):
    if all(g is None for g in gold):
        return SequenceExample(tuple(tokens))
    if any(g is None for g in gold):
        raise ParseError("sequence mixes labeled and unlabeled positions", first_line)
    return SequenceExample(tuple(tokens), tuple(gold))


# --------------------------------------------------------------------------
# emitting


def _fmt_float(v: float) -> str:
    return repr(float(v))


def format_label(label) -> str:
    if label is UNLABELED:
        return ""
    if isinstance(label, Binary):
        return "+1" if label.y > 0 else "-1"
    if isinstance(label, Regression):
        return _fmt_float(label.target)
    if isinstance(label, Multiclass):
        return str(label.cls + 1)
    if isinstance(label, CostSensitive):
        return " ".join(f"{c + 1}:{_fmt_float(v)}" for c, v in label.costs)
    if isinstance(label, ContextualBandit):
        return f"{label.action + 1}:{_fmt_float(1.0 - label.reward)}:{_fmt_float(label.prob)}"
    raise TypeError(f"cannot format {type(label).__name__}")


def format_features(features) -> str:
    return " ".join(f"#{f.id}:{_fmt_float(f.value)}" for f in features)


def format_example(ex: Example) -> str:
    """Inverse of :func:`parse_line` for hashed examples."""
    head = format_label(ex.label)
    if head and ex.importance != 1.0:
        head += " " + _fmt_float(ex.importance)
    if ex.tag is not None:
        head += (" " if head else "") + "'" + ex.tag
    body = format_features(ex.features)
    return f"{head} | {body}" if head else f"| {body}"


def format_sequence(seq: SequenceExample) -> str:
    lines = []
    for t, tok in enumerate(seq.tokens):
        head = str(seq.gold[t] + 1) if seq.gold is not None else ""
        lines.append(f"{head} | {format_features(tok)}" if head else f"| {format_features(tok)}")
    return "\n".join(lines) + "\n"
