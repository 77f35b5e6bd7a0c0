"""
Corpus-level coverage diagnostics for translation output.

rep_score        repeated n-grams and doubled words beyond the reference
drop_score       percentage of source words aligned in the reference but not
                 in the hypothesis
coverage_penalty log-coverage rescoring term with a floor ``eps``
"""
from collections import Counter
import math

import numpy as np

from .corpus import AlignmentSet, Corpus
from .errors import EmptyReference, IndexOutOfRange, SentenceCountMismatch

__all__ = ["ngram_counts", "sentence_rep", "rep_score", "drop_score", "coverage_penalty"]


def ngram_counts(tokens, n):
    """Overlapping n-gram counts within one sentence."""
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _doubles(tokens):
    # position i with tokens[i] == tokens[i+1]; a run of length k counts k-1
    return Counter(a for a, b in zip(tokens, tokens[1:]) if a == b)


def sentence_rep(hyp, ref, n=2, l1=1.0, l2=2.0):
    """
    Sentence-level repetition score

        l1 * sum_{s: t(s) >= 2} max(0, t(s) - r(s))
      + l2 * sum_w max(0, t(ww) - r(ww))

    where t and r count n-grams s (or doubled words ww) in ``hyp`` and ``ref``.
    """
    t, r = ngram_counts(hyp, n), ngram_counts(ref, n)
    rep = sum(max(0, c - r[s]) for s, c in t.items() if c >= 2)
    td, rd = _doubles(hyp), _doubles(ref)
    dup = sum(max(0, c - rd[w]) for w, c in td.items())
    return l1 * rep + l2 * dup


def rep_score(hyp, ref, n=2, l1=1.0, l2=2.0):
    """
    REP-score: 100 * sum of sentence repetition scores / reference word count.

    Parameters
    ----------
    hyp, ref : Corpus or sequence of token lists
    n : int
        n-gram order of the first term.
    l1, l2 : float
        Weights of the n-gram term and of the doubled-word term.

    Raises
    ------
    SentenceCountMismatch, EmptyReference
    """
    hyp, ref = Corpus(hyp), Corpus(ref)
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(hyp) != len(ref):
        raise SentenceCountMismatch(f"{len(hyp)} hypothesis vs {len(ref)} reference sentences")
    words = ref.n_tokens
    if words == 0:
        raise EmptyReference("reference corpus has no words")
    total = math.fsum(sentence_rep(h, r, n, l1, l2) for h, r in zip(hyp, ref))
    return 100.0 * total / words


def drop_score(src, ref_align, hyp_align):
    """
    DROP-score: percentage of source tokens that have a link in ``ref_align``
    and none in ``hyp_align``, over all source tokens of the corpus.
    """
    src = Corpus(src)
    ref_align = ref_align if isinstance(ref_align, AlignmentSet) else AlignmentSet(ref_align)
    hyp_align = hyp_align if isinstance(hyp_align, AlignmentSet) else AlignmentSet(hyp_align)
    if not len(src) == len(ref_align) == len(hyp_align):
        raise SentenceCountMismatch(
            f"{len(src)} source sentences, {len(ref_align)} reference and {len(hyp_align)} hypothesis alignment lines"
        )
    dropped = 0
    for k, sent in enumerate(src):
        in_ref = ref_align.source_positions(k)
        in_hyp = hyp_align.source_positions(k)
        bad = [i for i in in_ref | in_hyp if i >= len(sent)]
        if bad:
            raise IndexOutOfRange(f"sentence {k}: source index {max(bad)} >= length {len(sent)}")
        dropped += len(in_ref - in_hyp)
    if src.n_tokens == 0:
        return 0.0
    return 100.0 * dropped / src.n_tokens


def coverage_penalty(att, beta, eps=0.1):
    """
    beta * sum_j log(max(eps, min(1, sum_t att[t, j]))).

    ``att`` is T x J (time steps by source words). Rows need not sum to one,
    so a sink column may be dropped beforehand. Always <= 0.
    """
    att = np.asarray(att, dtype=float)
    if att.ndim != 2:
        raise ValueError("attention matrix must be 2-d (T x J)")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    cover = np.maximum(eps, np.minimum(1.0, att.sum(axis=0)))
    return beta * math.fsum(np.log(cover)) + 0.0
