"""
Attention with a budget per source word
=======================================

Each source word gets a fertility. Over a decoding run its cumulative
attention may not exceed that fertility; a sink word with unlimited credit
soaks up whatever is left.
"""
import numpy as np

from constrained_attention import AlignmentSet, Corpus, assign_fertilities, build_guided_table, run_session

np.set_printoptions(precision=3, suppress=True)

# fertilities from word alignments: most target words aligned to one occurrence, plus one
src = Corpus(["das haus ist klein", "das haus"])
align = AlignmentSet.from_lines(["0-0 1-1 2-2 3-3 3-4", "0-0 1-1"])
table = build_guided_table(src, align, add=1.0)
print("table:", table.values)

tokens = ["das", "haus", "ist", "klein"]
f = assign_fertilities("guided", tokens, table=table)
print("fertility with sink:", f)

# a decoder that keeps looking at the same word
rng = np.random.default_rng(1)
scores = rng.normal(scale=0.3, size=(12, 5))
scores[:, 1] += 2.0
scores[:, 4] -= 1.0

for transform in ("softmax", "csoftmax", "csparsemax"):
    att, beta = run_session(f, scores, transform)
    print(f"\n{transform}: cumulative attention {beta}")
    print(att)

# the exhaustion bonus nudges scores toward words with credit left
att, beta = run_session(f, scores, "csparsemax", exhaustion=0.2)
print("\ncsparsemax with bonus 0.2:", beta)
