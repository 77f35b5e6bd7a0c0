"""Tokenized corpora, word alignments, and the text formats they live in."""
from dataclasses import dataclass
import json
import sys

from .errors import IndexOutOfRange, LengthMismatch

__all__ = [
    "Corpus",
    "AlignmentSet",
    "parse_alignment_line",
    "read_corpus",
    "read_alignments",
    "read_attention_matrix",
    "open_input",
]


@dataclass(frozen=True)
class Corpus:
    """Pre-tokenized sentences, one tuple of tokens per sentence."""

    sentences: tuple

    def __post_init__(self):
        sents = tuple(tuple(s.split()) if isinstance(s, str) else tuple(s) for s in self.sentences)
        object.__setattr__(self, "sentences", sents)

    @classmethod
    def from_lines(cls, lines):
        return cls(tuple(line.split()) for line in lines)

    @property
    def n_tokens(self):
        return sum(len(s) for s in self.sentences)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]


@dataclass(frozen=True)
class AlignmentSet:
    """Per-sentence sets of ``(source index, target index)`` pairs, 0-based."""

    links: tuple

    def __post_init__(self):
        links = tuple(frozenset((int(i), int(j)) for i, j in s) for s in self.links)
        for s in links:
            for i, j in s:
                if i < 0 or j < 0:
                    raise IndexOutOfRange(f"negative alignment index {i}-{j}")
        object.__setattr__(self, "links", links)

    @classmethod
    def from_lines(cls, lines):
        return cls(parse_alignment_line(line) for line in lines)

    def __len__(self):
        return len(self.links)

    def __iter__(self):
        return iter(self.links)

    def __getitem__(self, i):
        return self.links[i]

    def source_positions(self, k):
        """Source indices with at least one link in sentence ``k``."""
        return {i for i, _ in self.links[k]}

    def check_against(self, corpus):
        """Raise unless this set is parallel to ``corpus`` with in-range source indices."""
        if len(self) != len(corpus):
            raise LengthMismatch(f"{len(self)} alignment lines for {len(corpus)} sentences")
        for k, (links, sent) in enumerate(zip(self.links, corpus)):
            for i, _ in links:
                if i >= len(sent):
                    raise IndexOutOfRange(f"sentence {k}: source index {i} >= length {len(sent)}")


def parse_alignment_line(line):
    """Parse ``"0-0 1-2 ..."`` (fast_align, source-target) into pairs."""
    pairs = []
    for item in line.split():
        src, sep, tgt = item.partition("-")
        if not sep:
            raise ValueError(f"bad alignment pair {item!r}")
        pairs.append((int(src), int(tgt)))
    return pairs


def open_input(path):
    if path == "-":
        return sys.stdin
    return open(path, encoding="utf-8")


def _lines(path):
    f = open_input(path)
    try:
        return [line.rstrip("\n") for line in f]
    finally:
        if f is not sys.stdin:
            f.close()


def read_corpus(path):
    return Corpus.from_lines(_lines(path))


def read_alignments(path):
    return AlignmentSet.from_lines(_lines(path))


def read_attention_matrix(path):
    """JSON array of rows, each a list of J numbers."""
    f = open_input(path)
    try:
        rows = json.load(f)
    finally:
        if f is not sys.stdin:
            f.close()
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise ValueError("attention matrix must be a JSON array of rows")
    if len({len(r) for r in rows}) > 1:
        raise LengthMismatch("attention rows have different lengths")
    return rows
