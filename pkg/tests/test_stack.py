from collections import Counter

import pytest

from reducto import Example, Feature, Multiclass, build_stack
from reducto.core import ConfigError, MismatchedLabel, Regression, TaskKind
from reducto.datagen import gen_separable
from reducto.stack import (
    IncompatibleChain, Layer, StackRandom, UnknownLayer, register_layer, reject_extra, take_k,
)


class Twice(Layer):
    """Test-only layer: two copies of the multiclass problem below, the
    first copy answers."""

    name = "twice"
    consumes = TaskKind.MULTICLASS
    emits = TaskKind.MULTICLASS
    num_instances = 2

    def predict(self, ex, below):
        return below.predict(ex, 0)

    def learn(self, ex, label, below, weight=1.0):
        out = below.learn(ex, 0, label, weight)
        below.learn(ex, 1, label, weight)
        return out


@register_layer("twice")
def _make_twice(pos, kw):
    reject_extra("twice", pos, kw)
    return Twice()


def feats(*ids):
    return tuple(Feature(i, 1.0) for i in ids)


def test_total_stride():
    assert build_stack("oaa:3 | base").total_stride == 3
    st = build_stack("search:tags=5 | csoaa:5 | base")
    assert st.total_stride == 5 and st.store.stride == 5
    assert st.config == "search:5|csoaa:5|base"
    assert build_stack("twice|oaa:3|base", bits=4).total_stride == 6


def test_bad_chains():
    with pytest.raises(IncompatibleChain):
        build_stack("oaa:3 | oaa:2 | base")
    with pytest.raises(IncompatibleChain):
        build_stack("oaa:3|csoaa:3|base")
    with pytest.raises(IncompatibleChain):
        build_stack("cb:3|csoaa:4|base")
    with pytest.raises(IncompatibleChain):
        build_stack("oaa_scores:3|base:loss=logistic")
    with pytest.raises(IncompatibleChain):
        build_stack("oaa:3")
    with pytest.raises(UnknownLayer):
        build_stack("nope:3|base")
    with pytest.raises(ConfigError):
        build_stack("oaa:1|base")
    with pytest.raises(ConfigError):
        build_stack("oaa:3,bogus=1|base")


def test_canonical_forms():
    assert build_stack("OAA : 3 |  base").config == "oaa:3|base"
    assert build_stack("oaa:k=3|base:bias=0").config == "oaa:3|base:bias=0"
    assert build_stack("woa:4|base").config == "woa:4|base"
    assert build_stack("woa:4,w=3|base").config == "woa:4,w=3.0|base"
    assert build_stack("ecoc:12|base").config == "ecoc:12,seed=0|base"
    assert build_stack("base:loss=logistic").task is TaskKind.BINARY


def test_fresh_oaa_uniform_over_classes():
    st = build_stack("oaa:3|base", seed=7)
    e = Example(feats(1, 2))
    counts = Counter()
    for _ in range(3000):
        counts[st.predict(e).cls] += 1
        st.step()
    assert set(counts) == {0, 1, 2}
    assert all(abs(c / 3000 - 1 / 3) < 0.03 for c in counts.values())


def test_fresh_predictions_do_not_consume_draws():
    st = build_stack("oaa:5|base", seed=3)
    e = Example(feats(9))
    assert len({st.predict(e).cls for _ in range(50)}) == 1


def test_trained_to_separability():
    data = gen_separable(3, 600, seed=1)
    st = build_stack("oaa:3|base", bits=10, seed=0)
    for _ in range(3):
        for ex in data:
            st.learn(ex)
    assert all(st.predict(ex).cls == ex.label.cls for ex in data)


def test_purity_and_first_learn():
    st = build_stack("oaa_scores:3|base")
    e = Example(feats(4), Multiclass(1))
    h = st.digest()
    p1, p2 = st.predict(e), st.predict(e)
    assert p1 == p2 and st.digest() == h
    assert st.learn(e).scores == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("config", ["oaa:4|base", "woa:4|base", "log_tree:4|base", "ecoc:4|base",
                                    "twice|oaa:4|base"])
def test_learn_returns_prior_predict(rng, config):
    st = build_stack(config, bits=8, seed=1)
    for _ in range(1000):
        e = Example(feats(*rng.integers(0, 40, 3).tolist()), Multiclass(int(rng.integers(4))))
        snap = st.predict(e)
        assert st.learn(e) == snap


def test_independent_stacks_identical_streams(rng):
    data = [Example(feats(*rng.integers(0, 30, 2).tolist()), Multiclass(int(rng.integers(3))))
            for _ in range(500)]
    a, b = build_stack("oaa:3|base", bits=8, seed=5), build_stack("oaa:3|base", bits=8, seed=5)
    assert [a.learn(e) for e in data] == [b.learn(e) for e in data]
    assert a.store.weights is not b.store.weights
    assert a.digest() == b.digest()


def test_offsets_mixed_radix_and_disjoint():
    st = build_stack("twice|oaa:3|base", bits=6)
    seen = []
    learn = st.base.learn

    def spy(ex, offset=0, label=None, weight=1.0):
        seen.append(offset)
        return learn(ex, offset, label, weight)

    st.base.learn = spy
    st.learn(Example(feats(1), Multiclass(2)))
    assert seen == [0, 1, 2, 3, 4, 5]

    store = st.store
    touched = []
    for off in range(st.total_stride):
        slots = set()
        store.foreach_feature(feats(1, 2, 3), off, lambda s, v: slots.add(s))
        touched.append(slots)
    for i in range(len(touched)):
        for j in range(i):
            assert not touched[i] & touched[j]


def test_single_pass_economy():
    data = gen_separable(4, 250, seed=2)
    st = build_stack("oaa:4|base", bits=8)
    for ex in data:
        st.learn(ex)
    assert st.learn_calls == 250
    assert st.base.learn_calls == 250 * 4


def test_label_mismatch_rejected():
    st = build_stack("oaa:3|base")
    with pytest.raises(MismatchedLabel):
        st.learn(Example(feats(1), Regression(1.0)))
    with pytest.raises(MismatchedLabel):
        st.learn(Example(feats(1)))


def test_stack_random():
    r = StackRandom(11)
    a = r.uniform(1, 2)
    assert r.uniform(1, 2) == a
    assert r.uniform(1, 3) != a
    r.advance()
    assert r.uniform(1, 2) != a
    assert all(0 <= r.randbelow(7, i) < 7 for i in range(100))


def test_take_k_aliases():
    assert take_k([], {"tags": "5"}, "tags") == 5
    with pytest.raises(ConfigError):
        take_k([], {}, "tags")
    with pytest.raises(ConfigError):
        take_k(["x"], {})
