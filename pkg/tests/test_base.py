import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from reducto.base import BaseConfig, BaseLearner, base_learn, base_predict, update_step
from reducto.core import Binary, ConfigError, Example, Feature, MismatchedLabel, Regression


def learner(bits=4, stride=1, **kw):
    return BaseLearner.with_new_store(BaseConfig(**kw), bits, stride)


def ex(pairs, y=None, h=1.0):
    feats = tuple(Feature(i, v) for i, v in pairs)
    if y is None:
        return Example(feats, importance=h)
    return Example(feats, Regression(y), h)


def test_fresh_predicts_zero():
    assert base_predict(learner(), ex([(3, 2.5)])) == 0.0


def test_hand_dot_product():
    L = learner()
    s = L.store
    s.weights[s.slot(1, 0)] = 0.5
    s.weights[s.slot(s.bias_id, 0)] = 0.1
    assert base_predict(L, ex([(1, 2.0)])) == 0.5 * 2.0 + 0.1
    digest = s.digest()
    assert base_predict(L, ex([(1, 2.0)])) == base_predict(L, ex([(1, 2.0)]))
    assert s.digest() == digest


def test_single_plain_step():
    L = learner(bias=False, learning_rate=0.5)
    assert base_learn(L, ex([(7, 1.0)], 1.0)) == 0.0
    assert L.store.weight_at(7, 0) == 1.0


def test_importance_doubles_plain_step():
    a, b = learner(bias=False), learner(bias=False)
    a.learn(ex([(2, 1.5)], 1.0, h=1.0))
    b.learn(ex([(2, 1.5)], 1.0, h=2.0))
    assert b.store.weight_at(2, 0) == 2 * a.store.weight_at(2, 0)


def test_adaptive_first_step_is_minus_eta():
    eta = 0.5
    assert update_step(2.0, 1.0, learning_rate=eta, adaptive_acc=0.0) == -eta
    L = learner(bias=False, adaptive=True, learning_rate=eta)
    L.learn(ex([(1, 1.0)], -1.0))  # g = 2 (0 - (-1)) = 2
    assert L.store.weight_at(1, 0) == -eta


@pytest.mark.parametrize("flags", [{}, {"adaptive": True}, {"normalized": True},
                                   {"adaptive": True, "normalized": True}])
def test_zero_gradient_no_step(flags):
    assert update_step(0.0, 3.0, learning_rate=0.5, adaptive_acc=0.0 if flags.get("adaptive") else None,
                       norm_max=1.0 if flags.get("normalized") else None) == 0.0
    L = learner(bias=False, **flags)
    L.learn(ex([(1, 1.0)], 0.0))
    assert L.store.weight_at(1, 0) == 0.0


def _flow_oracle(w0, xs, rates, us, y, h):
    """Integrate dw/dtau = -2 (w.x - y) u r over tau in [0, h]."""
    xs, rates, us = map(np.asarray, (xs, rates, us))

    def rhs(_, w):
        return -2.0 * (w @ xs - y) * us * rates

    sol = solve_ivp(rhs, (0.0, h), np.asarray(w0, dtype=float), rtol=1e-12, atol=1e-14,
                    method="DOP853")
    return sol.y[:, -1]


@pytest.mark.parametrize("h", [0.1, 1.0, 7.5, 40.0])
def test_invariant_matches_gradient_flow(h):
    L = learner(bits=6, bias=False, invariant=True, learning_rate=0.3, power_t=0.0)
    feats = [(1, 0.7), (2, -1.3), (3, 2.0)]
    L.learn(ex(feats, 0.5))  # move off zero first
    w0 = [L.store.weight_at(i, 0) for i, _ in feats]
    xs = [v for _, v in feats]
    s = L.learn(ex(feats, 2.0, h=h))
    got = [L.store.weight_at(i, 0) for i, _ in feats]
    want = _flow_oracle(w0, xs, [0.3] * 3, xs, 2.0, h)
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-10)
    # residual shrinks by exp(-2 h q), never past the target
    q = 0.3 * sum(x * x for x in xs)
    post = L.predict(ex(feats))
    assert math.isclose(post - 2.0, (s - 2.0) * math.exp(-2 * h * q), rel_tol=1e-9, abs_tol=1e-12)


def test_invariant_importance_composition(rng):
    def run(splits):
        L = learner(bits=8, invariant=True, power_t=0.0, learning_rate=0.2)
        e = [(5, 1.0), (9, -0.4)]
        for h in splits:
            L.learn(ex(e, 3.0, h=h))
        return np.array(L.store.as_numpy()[:, 0])

    for _ in range(20):
        a, b = rng.uniform(0.1, 5.0, 2)
        whole, parts = run([a + b]), run([a, b])
        np.testing.assert_allclose(whole, parts, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("c,exact", [(4.0, True), (1000.0, False)])
def test_normalized_scale_invariance(rng, c, exact):
    stream = [(float(rng.normal()), float(rng.normal())) for _ in range(500)]

    def run(scale):
        L = learner(bits=6, normalized=True, adaptive=True)
        out = []
        for x1, x2 in stream:
            e = ex([(1, x1 * scale), (2, x2)], 2 * x1 - x2)
            out.append(L.learn(e))
        return np.array(out)

    base, scaled = run(1.0), run(c)
    if exact:
        assert np.array_equal(base, scaled)
    else:
        np.testing.assert_allclose(scaled, base, rtol=1e-6, atol=1e-9)


def test_convergence_noiseless(rng):
    L = learner(bits=4, adaptive=True)
    losses = []
    for x in rng.normal(size=10_000):
        s = L.learn(ex([(1, float(x))], 3.0 * x))
        losses.append((s - 3.0 * x) ** 2)
    assert np.mean(losses[-1000:]) < 1e-3


def test_update_count_and_return_contract(rng):
    L = learner(bits=6, stride=2, adaptive=True, normalized=True, invariant=True)
    n_pos = 0
    for _ in range(300):
        e = ex([(int(rng.integers(50)), float(rng.normal()))], float(rng.normal()), h=float(rng.uniform(0.1, 3)))
        m = int(rng.integers(2))
        before = L.predict(e, m)
        assert L.learn(e, m) == before
        n_pos += 1
    L.learn(e, 0, weight=0.0)
    assert L.update_count == n_pos
    assert sum(L.offset_updates) == n_pos


def test_label_types():
    L = learner(loss="logistic")
    with pytest.raises(MismatchedLabel):
        L.learn(ex([(1, 1.0)], 1.0))
    L.learn(Example((Feature(1, 1.0),), Binary(1)))
    assert L.predict_probability(Example((Feature(1, 1.0),))) > 0.5
    with pytest.raises(ConfigError):
        BaseConfig(loss="logistic", invariant=True)
    with pytest.raises(ConfigError):
        BaseConfig(loss="hinge")
