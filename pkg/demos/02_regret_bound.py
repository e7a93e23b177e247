"""Squared-loss regret controls multiclass regret.

If a regressor f has average squared regret r against the true class
probabilities p, then picking argmax f loses at most sqrt(2 k r) against
picking the most likely class.  Moving the top two classes' scores to their
midpoint makes the bound an equality.

Run: python3 demos/02_regret_bound.py
"""
# %%
import numpy as np

from reducto.multiclass import adversarial_scores, regret_bound_check

p = np.array([0.5, 0.3, 0.2])
f = adversarial_scores(p)
print("p =", p, " f =", f)
mc, sq, bound = regret_bound_check(p, f)
print(f"multiclass regret {mc:.4f}  squared regret {sq:.6f}  bound {bound:.4f}")

# %% random instances never break it
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(20_000):
    k = int(rng.integers(2, 11))
    p = rng.dirichlet(np.ones(k))
    f = p + rng.normal(0, 0.1, k)
    mc, _, bound = regret_bound_check(p, f)
    worst = max(worst, mc / bound if bound else 0.0)
print(f"largest regret/bound ratio over 20000 draws: {worst:.4f}")
