"""Sequence tagging by learning to search versus tagging each token alone.

Tags follow a chain (next tag = previous + 1 mod k, mostly) and half of the
tokens are an uninformative placeholder.  A per-token classifier can only
guess at those positions; the search policy sees its own previous tag.

Run: python3 demos/05_search.py
"""
# %%
from reducto.datagen import gen_hmm
from reducto.search import (
    SearchState, accuracy, independent_baseline, predict_independent, train_search,
)

k = 5
data = gen_hmm(k, T=10, n=3000, sharpness=0.9, emission_noise=0.5, seed=0)
train, test = data[:2500], data[2500:]

base = independent_baseline(train, k, bits=14)
print(f"independent tokens  {accuracy([predict_independent(base, s) for s in test], test):.3f}")

for history in (0, 1):
    stack = train_search(train, SearchState(k, history=history), bits=14)
    acc = accuracy([stack.predict(s).tags for s in test], test)
    print(f"search, history={history}   {acc:.3f}")

print("gold     ", test[0].gold)
print("predicted", stack.predict(test[0]).tags)
