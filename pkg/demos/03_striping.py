"""All sub-models of a reduction share one weight table.

With stride 4, model m's weight for feature f sits at f*4 + m, so the four
one-against-all classifiers' weights for a feature are neighbours in memory.
Training the striped table gives exactly the same numbers as training four
separate tables.

Run: python3 demos/03_striping.py
"""
# %%
import numpy as np

from reducto import BaseConfig, BaseLearner, Example, Feature, Regression
from reducto.weights import new_store

store = new_store(bits=4, stride=4)
print("model 1, features 0,1,2 ->", [store.slot(f, 1) for f in range(3)])

# %%
cfg = BaseConfig(adaptive=True, normalized=True)
striped = BaseLearner.with_new_store(cfg, 10, 4)
separate = [BaseLearner.with_new_store(cfg, 10, 1) for _ in range(4)]
rng = np.random.default_rng(1)
for _ in range(5000):
    ex = Example((Feature(int(rng.integers(1 << 20)), float(rng.normal())),),
                 Regression(float(rng.normal())))
    m = int(rng.integers(4))
    striped.learn(ex, m)
    separate[m].learn(ex, 0)

table = striped.store.as_numpy()
same = all(np.array_equal(table[:, m], s.store.as_numpy()[:, 0]) for m, s in enumerate(separate))
print("striped weights identical to separate tables:", same)
