"""Binary vs regression one-against-all on a 3-class problem where no class
is more likely than not.

Run: python3 demos/01_consistency.py
"""
# %%
import numpy as np

from reducto import build_stack
from reducto.datagen import gen_inconsistency, inconsistency_probs

delta = 0.05
print("class probabilities:", inconsistency_probs(delta))  # (0.4, 0.3, 0.3)

data = gen_inconsistency(delta, 100_000, seed=0)
train, test = data[:50_000], data[50_000:]

# %% every binary "is it class i?" classifier should learn to say no
oaa = build_stack("oaa:3|base", bits=10)
scores = build_stack("oaa_scores:3|base", bits=10)
for ex in train:
    oaa.learn(ex)
    scores.learn(ex)

print("oaa binary scores:", np.round(oaa.instance_predictions(test[0]), 3))
print("oaa_scores scores: ", np.round(scores.predict(test[0]).scores, 3))


# %% the binary version then guesses uniformly: loss 2/3 instead of 0.6
def error(stack, examples):
    wrong = 0
    for ex in examples:
        wrong += stack.predict(ex).cls != ex.label.cls
        stack.step()  # fresh tie-break draw per example
    return wrong / len(examples)


print(f"oaa test loss        {error(oaa, test):.4f}   (2/3 = 0.6667)")
print(f"oaa_scores test loss {error(scores, test):.4f}   (Bayes = {0.5 + 2 * delta:.4f})")
