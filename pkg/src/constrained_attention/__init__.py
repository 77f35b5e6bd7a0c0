"""Sparse and constrained attention transforms with fertility bounds and coverage metrics."""
from .errors import (
    DegenerateActiveSetWarning,
    DegenerateWeights,
    EmptyReference,
    IndexOutOfRange,
    InfeasibleBudget,
    InfeasibleError,
    LengthMismatch,
    MissingTable,
    NoFeasiblePartition,
    SentenceCountMismatch,
    UnstableActiveSet,
)
from .transforms import (
    ProjectionCertificate,
    certificate_violations,
    csoftmax_backward,
    csoftmax_forward,
    csparsemax_backward,
    csparsemax_forward,
    get_transform,
    softmax_backward,
    softmax_forward,
    sparsemax_backward,
    sparsemax_forward,
)
from .qk import QkProblem, QkSolution, map_csparsemax, solve_qk, solve_qk_sorted, unmap_csparsemax
from .fertility import (
    FertilityTable,
    SessionState,
    assign_fertilities,
    build_guided_table,
    run_session,
    start_session,
    step,
)
from .corpus import AlignmentSet, Corpus
from .metrics import coverage_penalty, drop_score, rep_score
from .oracles import OracleReport, finite_diff_check, oracle_csoftmax, oracle_csparsemax

__version__ = "0.1.0"
