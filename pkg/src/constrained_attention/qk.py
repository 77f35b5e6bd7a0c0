"""
Singly-constrained separable quadratic programs.

Solves

    minimize    sum_j c_j x_j^2
    subject to  sum_j c_j x_j = d,   a_j <= x_j <= b_j,

whose minimizer has the clamp form x_j = max(a_j, min(b_j, y)) for a single
scalar y. The main solver is the split-point shrinking method of Pardalos and
Kovoor: pick a pivot among the remaining breakpoints, evaluate the budget at
it, and discard every breakpoint on the wrong side. With a median pivot the
working set halves each round, giving O(J) total work.

A sort-based O(J log J) solver is provided as an independent reference.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeights, InfeasibleBudget

__all__ = [
    "QkProblem",
    "QkSolution",
    "solve_qk",
    "solve_qk_sorted",
    "map_csparsemax",
    "unmap_csparsemax",
    "select_median",
    "median_of_medians",
]

PIVOTS = ("median", "random", "bfprt")


@dataclass(frozen=True)
class QkProblem:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if not (a.ndim == 1 and a.shape == b.shape == c.shape):
            raise ValueError("a, b, c must be 1-d arrays of equal length")
        if np.isnan(a).any() or np.isnan(b).any() or np.isnan(c).any():
            raise ValueError("NaN in problem data")
        if np.any(a > b):
            raise ValueError("lower bounds must not exceed upper bounds")
        if np.any(a == np.inf) or np.any(b == -np.inf):
            raise ValueError("a must be < +inf and b must be > -inf")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("weights c must be finite and nonnegative")
        if not np.isfinite(self.d):
            raise ValueError("budget d must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", float(self.d))

    @property
    def size(self):
        return self.a.shape[0]

    def budget_range(self):
        """Return ``(sum c*a, sum c*b)`` over positive weights, with +-inf."""
        w = self.c > 0
        return _weighted_sum(self.c[w], self.a[w]), _weighted_sum(self.c[w], self.b[w])

    def budget(self, y):
        """Evaluate g(y) = sum_j c_j clamp(y, a_j, b_j)."""
        w = self.c > 0
        return float(np.sum(self.c[w] * np.clip(y, self.a[w], self.b[w])))


@dataclass(frozen=True)
class QkSolution:
    x: np.ndarray
    y: float
    n_inspected: int = 0
    n_iterations: int = 0


def _weighted_sum(c, v):
    if np.any(v == -np.inf):
        return -np.inf
    if np.any(v == np.inf):
        return np.inf
    return float(np.sum(c * v))


def _tolerance(p):
    return 1e-12 * max(1.0, abs(p.d))


# ---------------------------------------------------------------------------
# selection


def select_median(values):
    """Lower median of a 1-d array by introselect (``np.partition``)."""
    k = (values.shape[0] - 1) // 2
    return float(np.partition(values, k)[k])


def _select(values, k):
    # deterministic k-th smallest via median-of-medians pivoting
    while True:
        n = values.shape[0]
        if n <= 25:
            return float(np.sort(values)[k])
        m = n // 5
        groups = np.sort(values[: 5 * m].reshape(m, 5), axis=1)[:, 2]
        pivot = _select(groups, (m - 1) // 2)
        lower = values[values < pivot]
        if k < lower.shape[0]:
            values = lower
            continue
        n_equal = np.count_nonzero(values == pivot)
        if k < lower.shape[0] + n_equal:
            return pivot
        k -= lower.shape[0] + n_equal
        values = values[values > pivot]


def median_of_medians(values):
    """Lower median with a worst-case linear deterministic selection."""
    values = np.asarray(values, dtype=float)
    return _select(values, (values.shape[0] - 1) // 2)


def _pivot_function(pivot, rng):
    if callable(pivot):
        return pivot
    if pivot == "median":
        return select_median
    if pivot == "bfprt":
        return median_of_medians
    if pivot == "random":
        gen = np.random.default_rng(rng)
        return lambda values: float(values[gen.integers(values.shape[0])])
    raise ValueError(f"unknown pivot {pivot!r}; expected one of {PIVOTS} or a callable")


# ---------------------------------------------------------------------------
# solvers


def _saturated(p, tol):
    """Handle infeasible and boundary budgets. Returns a solution or None."""
    lo, hi = p.budget_range()
    if p.d < lo - tol or p.d > hi + tol:
        raise InfeasibleBudget(f"budget d={p.d!r} outside [{lo!r}, {hi!r}]")
    active = p.c > 0
    if not active.any():
        y = 0.0
    elif np.isfinite(hi) and p.d >= hi - tol:
        y = float(np.max(p.b[active]))
    elif np.isfinite(lo) and p.d <= lo + tol:
        y = float(np.min(p.a[active]))
    else:
        return None
    # y sits at the extreme breakpoint, so the clamp pins every weighted x to b (or a)
    return QkSolution(x=np.clip(y, p.a, p.b), y=y)


def solve_qk(problem, pivot="median", rng=None):
    """
    Solve a singly-constrained separable QP by split-point shrinking.

    Parameters
    ----------
    problem : QkProblem
    pivot : {"median", "random", "bfprt"} or callable
        How the next split point is chosen from the remaining breakpoints.
        ``"median"`` uses introselect, ``"bfprt"`` the deterministic
        median-of-medians, ``"random"`` a uniformly drawn breakpoint (seeded
        by ``rng``). A callable receives the 1-d array of remaining split
        points and must return one of them. Only the running time depends
        on this choice.
    rng : seed or numpy Generator, optional
        Used by ``pivot="random"``.

    Returns
    -------
    QkSolution
        ``x`` is the minimizer, ``y`` the shared clamp level,
        ``n_inspected`` counts split points and working-set entries touched.

    Raises
    ------
    InfeasibleBudget
        If ``d`` is outside ``[sum c*a, sum c*b]``.
    DegenerateWeights
        If no slack weight remains and the tight sum misses ``d``.
    """
    p = problem
    tol = _tolerance(p)
    done = _saturated(p, tol)
    if done is not None:
        return done
    choose = _pivot_function(pivot, rng)

    d = p.d
    active = p.c > 0
    aw, bw, cw = p.a[active], p.b[active], p.c[active]
    points = np.concatenate([aw[np.isfinite(aw)], bw[np.isfinite(bw)]])
    tau_l, tau_r = -np.inf, np.inf
    s_tight = 0.0
    xi = 0.0
    inspected = 0
    iterations = 0
    y = None

    while True:
        # settle every coordinate whose clamp is decided on [tau_l, tau_r]
        upper = bw <= tau_l
        lower = aw >= tau_r
        slack = (aw <= tau_l) & (bw >= tau_r)
        s_tight += float(np.sum(cw[upper] * bw[upper])) + float(np.sum(cw[lower] * aw[lower]))
        xi += float(np.sum(cw[slack]))
        keep = ~(upper | lower | slack)
        aw, bw, cw = aw[keep], bw[keep], cw[keep]
        points = points[(points > tau_l) & (points < tau_r)]
        if not aw.shape[0]:
            break

        iterations += 1
        inspected += points.shape[0] + aw.shape[0]
        tau = choose(points)
        s = s_tight + xi * tau + float(np.sum(cw * np.clip(tau, aw, bw)))
        if s <= d:
            tau_l = tau
        if s >= d:
            tau_r = tau
        if tau_l == tau_r:
            y = tau
            break

    if y is None:
        if xi > 0:
            y = (d - s_tight) / xi
            y = min(max(y, tau_l), tau_r)
        else:
            if abs(s_tight - d) > 1e-9 * max(1.0, abs(d)):
                raise DegenerateWeights(f"tight sum {s_tight!r} != budget {d!r} with zero slack")
            y = tau_l if np.isfinite(tau_l) else (tau_r if np.isfinite(tau_r) else 0.0)

    x = np.clip(y, p.a, p.b)
    return QkSolution(x=x, y=float(y), n_inspected=inspected, n_iterations=iterations)


def solve_qk_sorted(problem):
    """Reference solver: sort all breakpoints and interpolate g(y) = d."""
    p = problem
    tol = _tolerance(p)
    done = _saturated(p, tol)
    if done is not None:
        return done

    active = p.c > 0
    a, b, c = p.a[active], p.b[active], p.c[active]
    bp = np.unique(np.concatenate([a[np.isfinite(a)], b[np.isfinite(b)]]))

    # g(y) = sum_{b<=y} c b + sum_{a>y} c a + y * (remaining weight)
    ob = np.argsort(b, kind="stable")
    b_sorted, cb = b[ob], c[ob]
    cum_cb_b = np.concatenate([[0.0], np.cumsum(np.where(np.isfinite(b_sorted), cb * b_sorted, 0.0))])
    cum_cb = np.concatenate([[0.0], np.cumsum(cb)])
    oa = np.argsort(a, kind="stable")
    a_sorted, ca = a[oa], c[oa]
    cum_ca_a = np.concatenate([[0.0], np.cumsum(np.where(np.isfinite(a_sorted), ca * a_sorted, 0.0))])
    cum_ca = np.concatenate([[0.0], np.cumsum(ca)])
    total = cum_cb[-1]

    def g(y):
        nb = np.searchsorted(b_sorted, y, side="right")  # b <= y
        na = np.searchsorted(a_sorted, y, side="right")  # a <= y, so a > y is the rest
        tight_hi = cum_cb_b[nb]
        tight_lo = cum_ca_a[-1] - cum_ca_a[na]
        slack = total - cum_cb[nb] - (cum_ca[-1] - cum_ca[na])
        return tight_hi + tight_lo + slack * y, slack

    d = p.d
    if bp.shape[0] == 0:
        y = d / total
    else:
        gv, _ = g(bp)
        k = np.searchsorted(gv, d, side="left")
        if k < bp.shape[0] and gv[k] == d:
            y = bp[k]
        elif k == 0:
            _, slope = g(bp[0] - 1.0)
            y = bp[0] - (gv[0] - d) / slope
        elif k == bp.shape[0]:
            _, slope = g(bp[-1] + 1.0)
            y = bp[-1] + (d - gv[-1]) / slope
        else:
            y0, y1 = bp[k - 1], bp[k]
            y = y0 + (d - gv[k - 1]) * (y1 - y0) / (gv[k] - gv[k - 1])
    x = np.clip(y, p.a, p.b)
    return QkSolution(x=x, y=float(y))


# ---------------------------------------------------------------------------
# constrained sparsemax as a QK problem


def map_csparsemax(z, u):
    """
    Rewrite the box-constrained simplex projection of ``z`` as a QkProblem.

    With x_j = (alpha_j - z_j) / 2 the projection becomes a QK problem with
    a = -z/2, b = (u - z)/2, c = 1 and d = (1 - sum z)/2.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    a = -z / 2.0
    b = np.where(np.isinf(u), np.inf, (u - z) / 2.0)
    return QkProblem(a=a, b=b, c=np.ones_like(z), d=(1.0 - float(np.sum(z))) / 2.0)


def unmap_csparsemax(z, solution):
    """Map a QK solution back to attention weights ``alpha = z + 2 x``."""
    return np.asarray(z, dtype=float) + 2.0 * solution.x
