import numpy as np
import pytest

from reducto.datagen import (
    BadDelta, gen_hmm, gen_inconsistency, gen_multiclass, gen_separable, inconsistency_probs,
)
from reducto.search import accuracy, independent_baseline, predict_independent
from reducto.textformat import hash_feature


@pytest.mark.parametrize("delta,want", [(0.05, (0.4, 0.3, 0.3)), (0.0, (0.5, 0.25, 0.25))])
def test_inconsistency_frequencies(delta, want):
    np.testing.assert_allclose(inconsistency_probs(delta), want)
    data = gen_inconsistency(delta, 50_000, seed=1)
    freq = np.bincount([e.label.cls for e in data], minlength=3) / len(data)
    np.testing.assert_allclose(freq, want, atol=0.01)
    assert all(len(e.features) == 1 for e in data[:10])


@pytest.mark.parametrize("delta", [1 / 12, 0.1, -0.01])
def test_inconsistency_bad_delta(delta):
    with pytest.raises(BadDelta):
        gen_inconsistency(delta, 10)


def test_hmm_clean_emissions_readable():
    data = gen_hmm(4, 6, 300, emission_noise=0.0, seed=2)
    base = independent_baseline(data, 4, bits=10)
    assert accuracy([predict_independent(base, s) for s in data], data) == 1.0


def test_hmm_shapes_and_determinism():
    assert gen_hmm(3, 5, 0) == []
    a, b = gen_hmm(3, 5, 20, seed=4), gen_hmm(3, 5, 20, seed=4)
    assert a == b
    assert all(len(s.tokens) == len(s.gold) == 5 for s in a)
    chain = gen_hmm(5, 8, 20, sharpness=1.0, seed=1)
    assert all(g[t] == (g[t - 1] + 1) % 5 for g in (s.gold for s in chain) for t in range(1, 8))
    with pytest.raises(ValueError):
        gen_hmm(1, 3, 3)


def test_hmm_noise_rate():
    data = gen_hmm(5, 10, 2000, emission_noise=0.3, seed=5, clean_first=True)
    unk = hash_feature("w=?")
    firsts = [s.tokens[0][0].id for s in data]
    rest = [tok[0].id for s in data for tok in s.tokens[1:]]
    assert unk not in firsts
    assert abs(sum(i == unk for i in rest) / len(rest) - 0.3) < 0.01


def test_multiclass_and_separable():
    d = gen_multiclass(4, 100, dim=7, seed=0)
    assert len(d) == 100 and all(len(e.features) == 7 for e in d)
    assert gen_multiclass(4, 50, seed=3) == gen_multiclass(4, 50, seed=3)
    s = gen_separable(3, 30, distractors=2, seed=0)
    assert all(len(e.features) == 3 for e in s)
