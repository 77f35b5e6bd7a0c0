"""Exception and warning types raised across the package."""


class InfeasibleError(ValueError):
    """The upper bounds cannot hold a probability distribution (sum(u) < 1)."""


class InfeasibleBudget(InfeasibleError):
    """The budget ``d`` lies outside ``[sum(c * a), sum(c * b)]``."""


class DegenerateWeights(ArithmeticError):
    """No slack weight is left to place the budget on."""


class DegenerateActiveSetWarning(RuntimeWarning):
    """Backward pass hit an empty free set; a fallback gradient was returned."""


class MissingTable(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class SentenceCountMismatch(LengthMismatch):
    pass


class IndexOutOfRange(LengthMismatch):
    pass


class EmptyReference(ValueError):
    pass


class NoFeasiblePartition(RuntimeError):
    """No index partition passed the KKT filter (oracle bug or infeasible input)."""


class UnstableActiveSet(RuntimeError):
    """Could not find an evaluation point whose active set survives perturbation."""
