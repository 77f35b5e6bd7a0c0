"""
Repetitions, dropped words and coverage
=======================================
"""
import numpy as np

from constrained_attention import AlignmentSet, Corpus, coverage_penalty, drop_score, rep_score

hyp = ["the the cat sat", "a dog a dog ran"]
ref = ["the cat sat", "a dog ran"]

# doubled words count twice as much as repeated bigrams
print("REP  %.2f" % rep_score(hyp[:1], ref[:1]))
print("REP  %.2f" % rep_score(hyp, ref))

# source words aligned in the reference but lost in the hypothesis
src = Corpus(["le chat noir"])
ref_align = AlignmentSet.from_lines(["0-0 1-2 2-1"])
hyp_align = AlignmentSet.from_lines(["0-0 1-1"])
print("DROP %.2f" % drop_score(src, ref_align, hyp_align))

# coverage penalty from an attention matrix (steps by words)
att = np.array([[0.5, 0.25, 0.0], [0.5, 0.25, 0.0]])
for beta in (0.0, 0.2, 1.0):
    print(f"cp(beta={beta}) = {coverage_penalty(att, beta):.4f}")
