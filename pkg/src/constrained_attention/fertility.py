"""
Fertility-bounded attention over a decoding run.

Each source word j gets a fertility f_j, a budget of attention it may receive
summed over all decoding steps. With cumulative attention beta, step t uses
upper bounds u_t = f - beta_{t-1}. A sink token with infinite fertility is
appended so the bounds always admit a distribution.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IndexOutOfRange, LengthMismatch, MissingTable
from .transforms import get_transform

__all__ = [
    "FertilityTable",
    "assign_fertilities",
    "build_guided_table",
    "read_fertility_table",
    "write_fertility_table",
    "SessionState",
    "start_session",
    "step",
    "run_session",
    "DEFAULT_EXHAUSTION",
]

# score bonus coefficient used when an exhaustion bonus is requested without a value
DEFAULT_EXHAUSTION = 0.2
STRATEGIES = ("constant", "guided", "predicted")


@dataclass(frozen=True)
class FertilityTable:
    """
    Type-level fertilities.

    ``values`` maps a token to its fertility as stored. Tokens missing from
    the table get ``default + add``.
    """

    values: dict = field(default_factory=dict)
    default: float = 1.0
    add: float = 0.0

    def __post_init__(self):
        vals = {str(k): float(v) for k, v in dict(self.values).items()}
        if any(not v >= 0 for v in vals.values()):
            raise ValueError("fertilities must be nonnegative")
        if self.add < 0 or self.default < 0:
            raise ValueError("default and additive constant must be nonnegative")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, token):
        if token in self.values:
            return self.values[token]
        return self.default + self.add

    def __len__(self):
        return len(self.values)


def assign_fertilities(strategy, source_tokens, table=None, f=None):
    """
    Fertility vector for one source sentence, with the sink (+inf) appended.

    Parameters
    ----------
    strategy : {"constant", "guided", "predicted"}
    source_tokens : sequence of str
    table : FertilityTable or sequence of float, optional
        Required by "guided" and "predicted". A "predicted" table may also be
        a per-position sequence of expected fertilities.
    f : float, optional
        Value used by "constant".
    """
    J = len(source_tokens)
    if strategy == "constant":
        if f is None or not f >= 0:
            raise ValueError("constant strategy needs a fertility f >= 0")
        fert = np.full(J, float(f))
    elif strategy in ("guided", "predicted"):
        if table is None:
            raise MissingTable(f"{strategy} strategy requires a fertility table")
        if isinstance(table, FertilityTable):
            fert = np.array([table[w] for w in source_tokens], dtype=float)
        elif strategy == "predicted":
            fert = np.asarray(table, dtype=float)
            if fert.shape != (J,):
                raise LengthMismatch(f"{fert.shape[0]} predicted fertilities for {J} tokens")
            if np.any(fert < 0) or np.isnan(fert).any():
                raise ValueError("fertilities must be nonnegative")
        else:
            raise TypeError("guided strategy needs a FertilityTable")
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return np.append(fert, np.inf)


def build_guided_table(corpus_src, alignments, add=1.0):
    """
    Fertility table from word alignments.

    Each token type gets the largest number of target words aligned to any
    single occurrence of it, or 1 if none of its occurrences is aligned; the
    constant ``add`` goes on top. A completely empty alignment set counts as
    "nothing aligned" for every sentence.
    """
    if len(alignments) == 0:
        links = [frozenset()] * len(corpus_src)
    else:
        if len(alignments) != len(corpus_src):
            raise LengthMismatch(f"{len(alignments)} alignment lines for {len(corpus_src)} sentences")
        links = alignments.links
    best = {}
    for k, (sent, pairs) in enumerate(zip(corpus_src, links)):
        degree = [0] * len(sent)
        for i, _ in pairs:
            if i >= len(sent):
                raise IndexOutOfRange(f"sentence {k}: source index {i} >= length {len(sent)}")
            degree[i] += 1
        for w, n in zip(sent, degree):
            best[w] = max(best.get(w, 0), n)
    values = {w: (n if n > 0 else 1) + add for w, n in best.items()}
    return FertilityTable(values, default=1.0, add=add)


def read_fertility_table(path, default=1.0, add=0.0):
    """Read ``token<TAB>fertility`` lines. Blank lines are skipped."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            token, sep, value = line.rpartition("\t")
            if not sep:
                raise ValueError(f"{path}:{n}: expected token<TAB>fertility")
            values[token] = float(value)
    return FertilityTable(values, default=default, add=add)


def write_fertility_table(table, path):
    with open(path, "w", encoding="utf-8") as f:
        for token, value in table.values.items():
            f.write(f"{token}\t{value!r}\n")


# ---------------------------------------------------------------------------
# decoding session


@dataclass(frozen=True)
class SessionState:
    """
    Per-sentence decoding state: fertilities ``f`` (last entry is the sink,
    +inf), cumulative attention ``beta``, step counter ``t``, exhaustion
    coefficient and transform name.
    """

    fertility: np.ndarray
    beta: np.ndarray
    t: int = 0
    exhaustion: float = 0.0
    transform: str = "csparsemax"

    def __post_init__(self):
        f = np.asarray(self.fertility, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if f.ndim != 1 or f.shape[0] < 1 or f.shape != beta.shape:
            raise ValueError("fertility and beta must be 1-d of equal length")
        if f[-1] != np.inf:
            raise ValueError("last fertility entry must be the +inf sink")
        if np.any(f < 0) or np.isnan(f).any():
            raise ValueError("fertilities must be nonnegative")
        if not self.exhaustion >= 0:
            raise ValueError("exhaustion coefficient must be >= 0")
        get_transform(self.transform)
        object.__setattr__(self, "fertility", f)
        object.__setattr__(self, "beta", beta)

    @property
    def bounds(self):
        """Remaining credit f - beta, floored at zero."""
        return np.maximum(self.fertility - self.beta, 0.0)


def start_session(fertility, transform="csparsemax", exhaustion=0.0):
    """Fresh state. ``fertility`` must already end with the +inf sink."""
    f = np.asarray(fertility, dtype=float)
    return SessionState(f, np.zeros_like(f), 0, float(exhaustion), transform)


def step(state, z):
    """
    One decoding step.

    Bounds are the remaining credit. For constrained transforms with a
    positive exhaustion coefficient c the scores become z + c * u on
    coordinates of finite fertility (the sink gets no bonus). Unconstrained
    transforms ignore fertility entirely.

    Returns ``(alpha, new_state)``; ``state`` is not modified.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != state.fertility.shape:
        raise LengthMismatch(f"scores have length {z.shape[0]}, expected {state.fertility.shape[0]}")
    tr = get_transform(state.transform)
    if tr.constrained:
        u = state.bounds
        if state.exhaustion > 0:
            finite = np.isfinite(state.fertility)
            z = z + state.exhaustion * np.where(finite, u, 0.0)
        alpha, _ = tr.forward(z, u)
    else:
        alpha, _ = tr.forward(z, None)
    return alpha, replace(state, beta=state.beta + alpha, t=state.t + 1)


def run_session(fertility, scores, transform="csparsemax", exhaustion=0.0):
    """
    Run ``step`` over a sequence of score vectors.

    Returns the T x (J+1) attention matrix and the final cumulative attention.
    """
    state = start_session(fertility, transform, exhaustion)
    rows = []
    for z in scores:
        alpha, state = step(state, z)
        rows.append(alpha)
    att = np.array(rows) if rows else np.zeros((0, state.fertility.shape[0]))
    return att, state.beta
