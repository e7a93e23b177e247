import math
from collections import Counter

import numpy as np
import pytest

from reducto import BaseConfig, Example, Feature, Multiclass, build_stack
from reducto.core import NEGATIVE, POSITIVE, Binary, CostSensitive
from reducto.datagen import gen_inconsistency, gen_multiclass, gen_separable, make_prototypes
from reducto.multiclass import (
    ECOC, CostSensitiveOAA, InvalidCodeMatrix, LogTree, NotAProbabilityVector, OaaScores,
    OneAgainstAll, adversarial_scores, check_code, exhaustive_code, hamming_decode,
    margin_decode, random_code, regret_bound_check,
)
from reducto.base import BaseLearner
from reducto.stack import ReductionStack, StackRandom
from reducto.weights import WeightStore


class FakeBelow:
    """Records calls; answers predict/learn with fixed scores."""

    def __init__(self, scores=None):
        self.scores = scores
        self.calls = []

    def predict(self, ex, i=0):
        self.calls.append(("predict", i, None, None))
        return self.scores[i] if self.scores else 0.0

    def learn(self, ex, i=0, label=None, weight=1.0):
        self.calls.append(("learn", i, label, weight))
        return self.scores[i] if self.scores else 0.0


def bound(layer, seed=0):
    layer.bind(StackRandom(seed))
    return layer


EX = Example((Feature(1, 1.0),), importance=2.0)


def test_oaa_learn_labels():
    below = FakeBelow()
    bound(OneAgainstAll(3)).learn(EX, Multiclass(1), below)
    assert [(c[1], c[2]) for c in below.calls] == [(0, NEGATIVE), (1, POSITIVE), (2, NEGATIVE)]


def test_woa_positive_weight():
    st = build_stack("woa:4,w=1.5|base", bits=6)
    seen = []
    learn = st.base.learn
    st.base.learn = lambda ex, off=0, label=None, weight=1.0: (
        seen.append((off, ex.importance * weight)), learn(ex, off, label, weight))[1]
    st.learn(Example((Feature(1, 1.0),), Multiclass(2), 2.0))
    assert seen == [(0, 2.0), (1, 2.0), (2, 3.0), (3, 2.0)]
    assert OneAgainstAll(4, weighted=True).positive_weight == 2 * 3 / 4


def _freq(layer, scores, n=10_000):
    counts = Counter()
    for _ in range(n):
        counts[layer.decide(scores)] += 1
        layer.rng.advance()
    return {c: v / n for c, v in counts.items()}


def test_oaa_tie_breaking():
    layer = bound(OneAgainstAll(5), seed=3)
    assert _freq(layer, [-1, -1, 0.3, -1, -1], 200) == {2: 1.0}
    f = _freq(layer, [0.2, 0.9, -1, -1, -1])
    assert set(f) == {0, 1} and all(abs(v - 0.5) < 0.02 for v in f.values())
    f = _freq(layer, [-1.0] * 5)
    assert set(f) == set(range(5)) and all(abs(v - 0.2) < 0.02 for v in f.values())


def test_oaa_error_transform_adversary():
    # true class 0 said positive, one false positive at class 1: eps = 1/3
    layer = bound(OneAgainstAll(3), seed=1)
    f = _freq(layer, [1.0, 1.0, -1.0])
    err = f.get(1, 0.0)
    exact = 1 / 2
    assert abs(err - exact) < 0.02
    assert exact <= (3 - 1) * (1 / 3)


def test_oaa_scores_rules():
    layer = OaaScores(3)
    assert layer.predict(EX, FakeBelow([0.2, 0.7, 0.1])).cls == 1
    assert layer.predict(EX, FakeBelow([0.5, 0.5, 0.1])).cls == 0
    assert CostSensitiveOAA(3).predict(EX, FakeBelow([0.5, 0.1, 0.1])).cls == 1


def test_argmax_invariant_to_positive_scaling(rng):
    for _ in range(200):
        s = rng.normal(size=6).tolist()
        c = float(rng.uniform(1e-3, 1e3))
        scaled = [c * v for v in s]
        assert OaaScores(6).predict(EX, FakeBelow(s)).cls == OaaScores(6).predict(EX, FakeBelow(scaled)).cls
        assert CostSensitiveOAA(6).predict(EX, FakeBelow(s)).cls == \
            CostSensitiveOAA(6).predict(EX, FakeBelow(scaled)).cls


def test_oaa_scores_learns_class_probabilities():
    # rate 0.5/t on one unit feature: the update is an exact running mean
    data = gen_inconsistency(0.05, 40_000, seed=4)
    st = build_stack("oaa_scores:3|base:bias=0", bits=8,
                     base_config=BaseConfig(learning_rate=0.5, power_t=1.0))
    for ex in data[:30_000]:
        st.learn(ex)
    pred = st.predict(data[0])
    freq = np.bincount([ex.label.cls for ex in data[:30_000]], minlength=3) / 30_000
    np.testing.assert_allclose(pred.scores, freq, rtol=1e-9)
    np.testing.assert_allclose(pred.scores, (0.4, 0.3, 0.3), atol=0.015)
    assert pred.cls == 0
    loss = sum(st.predict(ex).cls != ex.label.cls for ex in data[30_000:]) / 10_000
    assert abs(loss - 0.6) < 0.02


def _one_hot(ex, k):
    return Example(ex.features, CostSensitive(tuple((i, float(i != ex.label.cls)) for i in range(k))))


def test_csoaa_one_hot():
    st = build_stack("csoaa:3|base", bits=6)
    e = Example((Feature(1, 1.0),), CostSensitive(((0, 0.0), (1, 1.0), (2, 1.0))))
    for _ in range(20):
        st.learn(e)
    assert st.predict(e).cls == 0


def test_csoaa_matches_oaa_scores_stream():
    data = gen_multiclass(4, 3000, label_noise=0.3, seed=1)
    a = build_stack("oaa_scores:4|base", bits=10)
    b = build_stack("csoaa:4|base", bits=10)
    pa = [a.learn(e).cls for e in data]
    pb = [b.learn(_one_hot(e, 4)).cls for e in data]
    assert pa == pb


def test_csoaa_sparse_label_trains_listed_only():
    below = FakeBelow()
    CostSensitiveOAA(5).learn(EX, CostSensitive(((1, 0.3), (4, 0.0))), below)
    assert sorted(c[1] for c in below.calls if c[0] == "learn") == [1, 4]


def test_ecoc_degenerate_code_is_binary():
    ecoc = build_stack("base", bits=6)
    layer = ECOC(2, code=np.array([[1, 0]]))
    assert layer.num_instances == 1
    layer.bind(StackRandom(0))
    st = ReductionStack([layer], BaseLearner(BaseConfig(), WeightStore(6, 1)), StackRandom(0))
    assert st.config == "ecoc:2,code=explicit|base"
    data = gen_separable(2, 300, seed=3)
    for ex in data:
        st.learn(ex)
        ecoc.learn(Example(ex.features, Binary(1 if ex.label.cls == 0 else -1)))
    assert np.array_equal(st.store.as_numpy(), ecoc.store.as_numpy())


def test_ecoc_exhaustive_corrects_one_flip():
    code = exhaustive_code(4)
    assert code.shape == (7, 4)
    for c in range(4):
        clean = [1.0 if b else -1.0 for b in code[:, c]]
        for r in range(7):
            flipped = list(clean)
            flipped[r] = -flipped[r]
            assert hamming_decode(code, flipped) == c
            assert margin_decode(code, flipped) == c


def test_code_checks():
    with pytest.raises(InvalidCodeMatrix):
        check_code(np.array([[1, 1, 0], [0, 0, 1]]))
    with pytest.raises(InvalidCodeMatrix):
        check_code(np.array([[1, 1, 1]]))
    with pytest.raises(InvalidCodeMatrix):
        ECOC(3, code=np.array([[1, 0, 0], [1, 0, 1]]).T[:2])
    for k in range(2, 9):
        check_code(exhaustive_code(k))
        assert exhaustive_code(k).shape == (2 ** (k - 1) - 1, k)
    c1, c2 = random_code(12, 36, seed=5), random_code(12, 36, seed=5)
    assert np.array_equal(c1, c2)
    assert ECOC(12).num_instances == math.ceil(10 * math.log2(12))


def test_ecoc_learns_separable():
    data = gen_separable(6, 1200, seed=2)
    st = build_stack("ecoc:6|base", bits=10)
    for _ in range(2):
        for ex in data:
            st.learn(ex)
    acc = sum(st.predict(ex).cls == ex.label.cls for ex in data) / len(data)
    assert acc > 0.99


@pytest.mark.parametrize("k", [2, 3, 5, 8, 13])
def test_tree_structure(k):
    t = LogTree(k)
    assert t.num_instances == k - 1 and len(t.nodes) == k - 1
    depth = math.ceil(math.log2(k))
    for c in range(k):
        path = t.path(c)
        assert len(path) <= depth
        node = 0
        for n, right in path:
            assert n == node
            node = t.nodes[n][2] if right else t.nodes[n][1]
        assert node == -(c + 1)


def test_tree_k2_is_one_binary_classifier():
    st = build_stack("log_tree:2|base", bits=6)
    b = build_stack("base", bits=6)
    for ex in gen_separable(2, 300, seed=4):
        st.learn(ex)
        b.learn(Example(ex.features, Binary(1 if ex.label.cls == 1 else -1)))
    assert np.array_equal(st.store.as_numpy(), b.store.as_numpy())


def test_tree_k8_three_predicts():
    below = FakeBelow([1.0] * 7)
    assert LogTree(8).predict(EX, below).cls == 7
    assert len(below.calls) == 3


def test_tree_separable_and_noisy():
    data = gen_separable(8, 4000, seed=6)
    st = build_stack("log_tree:8|base", bits=10)
    for _ in range(2):
        for ex in data:
            st.learn(ex)
    assert sum(st.predict(ex).cls == ex.label.cls for ex in data) / len(data) >= 0.99

    protos = make_prototypes(8, 10, 9)
    tr = gen_multiclass(8, 16_000, separation=2.5, label_noise=0.2, seed=1, prototypes=protos)
    te = gen_multiclass(8, 4000, separation=2.5, label_noise=0.2, seed=2, prototypes=protos)
    accs = {}
    for name in ("log_tree", "oaa_scores"):
        st = build_stack(f"{name}:8|base", bits=10)
        for ex in tr:
            st.learn(ex)
        accs[name] = sum(st.predict(ex).cls == ex.label.cls for ex in te) / len(te)
    assert accs["log_tree"] <= accs["oaa_scores"]


def test_regret_bound_examples():
    assert regret_bound_check([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == (0.0, 0.0, 0.0)
    mc, sq, b = regret_bound_check([0.5, 0.3, 0.2], [0.4, 0.4, 0.2])
    assert math.isclose(mc, 0.2, abs_tol=1e-12)
    assert math.isclose(sq, 0.02 / 3, rel_tol=1e-12)
    assert math.isclose(b, 0.2, rel_tol=1e-12)
    np.testing.assert_allclose(adversarial_scores([0.5, 0.3, 0.2]), [0.4, 0.4, 0.2])


def test_regret_bound_sweep(rng):
    for _ in range(1000):
        k = int(rng.integers(2, 11))
        p = rng.dirichlet(np.ones(k))
        f = rng.random(k) if rng.random() < 0.5 else p + rng.normal(0, 0.1, k)
        mc, _, b = regret_bound_check(p, f)
        assert mc <= b + 1e-12


def test_regret_bound_rejects_non_distribution():
    with pytest.raises(NotAProbabilityVector):
        regret_bound_check([0.5, 0.6], [0, 0])
    with pytest.raises(NotAProbabilityVector):
        regret_bound_check([1.0], [0, 0])
