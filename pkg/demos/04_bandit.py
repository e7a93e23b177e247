"""Learning a policy from logged bandit feedback.

Each log record says which action was taken, the reward seen and the
probability the logging policy had of taking it.  Dividing the observed cost
by that probability gives an unbiased cost for every action, which a
cost-sensitive learner can use.

Run: python3 demos/04_bandit.py
"""
# %%
import numpy as np

from reducto import Example, build_stack
from reducto.bandit import cb_to_cs_ips, policy_value_ips, stack_policy
from reducto.core import ContextualBandit
from reducto.datagen import context_features, gen_cb_log, true_policy_value

print(cb_to_cs_ips(ContextualBandit(action=1, reward=0.8, prob=0.5), 3))

# %% 20 contexts, 4 actions, a different best action per context
rng = np.random.default_rng(3)
R = rng.uniform(0.1, 0.5, (20, 4))
best = rng.integers(0, 4, 20)
R[np.arange(20), best] = 0.9
log = gen_cb_log(4, 20, R, 40_000, seed=4)

stack = build_stack("cb:4|csoaa:4|base", bits=12)
for ex in log:
    stack.learn(ex)
policy = stack_policy(stack)
chosen = [policy(Example(f)) for f in context_features(20)]
print("contexts where the learned policy picks the best action:",
      sum(int(c == b) for c, b in zip(chosen, best)), "/ 20")

# %% evaluate it off-policy on a fresh log
fresh = gen_cb_log(4, 20, R, 40_000, seed=5)
print(f"IPS estimate {policy_value_ips(fresh, policy):.3f}   "
      f"true value {true_policy_value(R, chosen):.3f}")
