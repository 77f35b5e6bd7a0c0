"""
Independent correctness oracles.

* ``oracle_csparsemax`` / ``oracle_csoftmax`` enumerate every candidate
  active-set partition and keep the one satisfying the KKT conditions.
  Exponential in J, so only meant for J <= 12.
* ``finite_diff_check`` compares backward vector-Jacobian products against
  central differences of the forward map.
* ``forward_suite`` / ``gradient_suite`` run these over seeded random
  instances and aggregate an OracleReport.
"""
from dataclasses import dataclass, field
import itertools
from functools import lru_cache

import numpy as np

from .errors import InfeasibleError, NoFeasiblePartition, UnstableActiveSet
from .transforms import get_transform

__all__ = [
    "OracleReport",
    "oracle_csparsemax",
    "oracle_csoftmax",
    "feasible_partitions",
    "random_instance",
    "finite_diff_check",
    "forward_suite",
    "gradient_suite",
]

KKT_SLACK = 1e-10
MAX_ORACLE_SIZE = 12


@dataclass
class OracleReport:
    max_abs_error: float = 0.0
    n_instances: int = 0
    tolerance: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    def add(self, error, instance, expected, got):
        self.n_instances += 1
        self.max_abs_error = max(self.max_abs_error, float(error))
        if not error <= self.tolerance:
            self.failures.append((instance, expected, got))

    def merge(self, other):
        self.n_instances += other.n_instances
        self.max_abs_error = max(self.max_abs_error, other.max_abs_error)
        self.failures.extend(other.failures)
        return self


@lru_cache(maxsize=None)
def _labelings(J, k):
    # every assignment of J coordinates to k labels, one row per assignment
    return np.array(list(itertools.product(range(k), repeat=J)), dtype=np.int8).reshape(-1, J)


def _prepare(z, u):
    z = np.asarray(z, dtype=float)
    J = z.shape[0]
    if J > MAX_ORACLE_SIZE:
        raise ValueError(f"oracle enumeration limited to J <= {MAX_ORACLE_SIZE}")
    u = np.full(J, np.inf) if u is None else np.asarray(u, dtype=float)
    if float(np.sum(u)) < 1.0 - 1e-12:
        raise InfeasibleError(f"infeasible bounds: sum(u) = {np.sum(u)!r} < 1")
    return z, u


def feasible_partitions(z, u, slack=KKT_SLACK):
    """
    All labelings (0 = zero, 1 = free, 2 = clipped) passing the KKT filter of
    the box-constrained Euclidean projection, with their thresholds.
    """
    z, u = _prepare(z, u)
    lab = _labelings(z.shape[0], 3)
    free, zero, clip = lab == 1, lab == 0, lab == 2
    # an infinite bound can never be active
    ok = ~np.any(clip & np.isinf(u), axis=1)
    uf = np.where(np.isinf(u), 0.0, u)
    n_free = free.sum(axis=1)
    sum_u = (clip * uf).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = ((free * z).sum(axis=1) + sum_u - 1.0) / n_free
    has_free = n_free > 0

    r = z[None, :] - tau[:, None]
    ub = np.broadcast_to(u, r.shape)
    with np.errstate(invalid="ignore"):
        good_free = np.where(free, (r > -slack) & (r < ub + slack), True).all(axis=1)
        good_zero = np.where(zero, r <= slack, True).all(axis=1)
        good_clip = np.where(clip, r >= ub - slack, True).all(axis=1)
    ok_free = ok & has_free & good_free & good_zero & good_clip

    # empty free set: clipped bounds must sum to one and some tau must separate
    # zero-set scores (z <= tau) from clipped ones (z - u >= tau)
    lo = np.where(zero, z, -np.inf).max(axis=1)
    hi = np.where(clip, z - uf, np.inf).min(axis=1)
    ok_sat = ok & ~has_free & (np.abs(sum_u - 1.0) <= slack) & (lo <= hi + slack)
    tau = np.where(has_free, tau, np.where(np.isfinite(hi), hi, lo))

    keep = ok_free | ok_sat
    return lab[keep], tau[keep]


def oracle_csparsemax(z, u=None):
    """
    Constrained sparsemax by enumerating all 3^J partitions.

    For each partition the threshold is
    tau = (sum_{free} z + sum_{clipped} u - 1) / |free|, and the partition is
    accepted when z - tau lies in (0, u) on the free set, <= 0 on the zero set
    and >= u on the clipped set.
    """
    z, u = _prepare(z, u)
    labs, taus = feasible_partitions(z, u)
    if labs.shape[0] == 0:
        raise NoFeasiblePartition(f"no KKT partition for z={z.tolist()}, u={u.tolist()}")
    lab, tau = labs[0], taus[0]
    alpha = np.where(lab == 1, z - tau, 0.0)
    alpha[lab == 2] = u[lab == 2]
    return alpha


def oracle_csoftmax(z, u=None):
    """Constrained softmax by enumerating all 2^J clipped sets."""
    z, u = _prepare(z, u)
    J = z.shape[0]
    clip = _labelings(J, 2).astype(bool)
    ok = ~np.any(clip & np.isinf(u), axis=1)
    uf = np.where(np.isinf(u), 0.0, u)
    s = 1.0 - (clip * uf).sum(axis=1)
    e = np.exp(z - np.max(z))
    Z = np.where(clip, 0.0, e).sum(axis=1)
    has_free = Z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p = s[:, None] * e[None, :] / Z[:, None]
    ub = np.broadcast_to(u, p.shape)
    with np.errstate(invalid="ignore"):
        good_free = np.where(~clip, p < ub + KKT_SLACK, True).all(axis=1)
        good_clip = np.where(clip, p >= ub - KKT_SLACK, True).all(axis=1)
    keep = ok & has_free & (s > 0) & good_free & good_clip
    # fully saturated: the clipped bounds alone sum to one
    keep_sat = ok & (np.abs(s) <= KKT_SLACK)
    hits = np.flatnonzero(keep)
    if hits.shape[0]:
        i = hits[0]
        return np.where(clip[i], u, p[i])
    hits = np.flatnonzero(keep_sat)
    if hits.shape[0]:
        return np.where(clip[hits[0]], u, 0.0)
    raise NoFeasiblePartition(f"no KKT clipped set for z={z.tolist()}, u={u.tolist()}")


def random_instance(rng, J, sink_prob=0.5):
    """
    Draw ``(z, u)`` with z ~ U[-2, 2] and u ~ U[0.1, 1.5]; with probability
    ``sink_prob`` the last bound is +inf. Bounds are redrawn until sum(u) >= 1.
    """
    z = rng.uniform(-2.0, 2.0, size=J)
    sink = rng.random() < sink_prob
    while True:
        u = rng.uniform(0.1, 1.5, size=J)
        if sink:
            u[-1] = np.inf
        if np.sum(u) >= 1.0:
            return z, u


# ---------------------------------------------------------------------------
# finite differences


def _partition(cert):
    return None if cert is None else cert.labels()


def _stable(fw, z, u, h, base):
    try:
        return _same_partition_nearby(fw, z, u, h, base)
    except InfeasibleError:
        return False


def _same_partition_nearby(fw, z, u, h, base):
    J = z.shape[0]
    for j in range(J):
        for sign in (1.0, -1.0):
            zp = z.copy()
            zp[j] += sign * h
            if not np.array_equal(_partition(fw(zp, u)[1]), base):
                return False
            if u is not None and np.isfinite(u[j]):
                up = u.copy()
                up[j] += sign * h
                if not np.array_equal(_partition(fw(z, up)[1]), base):
                    return False
    return True


def _numeric_jacobians(fw, z, u, h):
    J = z.shape[0]
    jz = np.zeros((J, J))
    ju = np.zeros((J, J))
    for j in range(J):
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        jz[:, j] = (fw(zp, u)[0] - fw(zm, u)[0]) / (2.0 * h)
        if u is not None and np.isfinite(u[j]):
            up, um = u.copy(), u.copy()
            up[j] += h
            um[j] -= h
            ju[:, j] = (fw(z, up)[0] - fw(z, um)[0]) / (2.0 * h)
    return jz, ju


def finite_diff_check(transform, z, u=None, h=1e-6, tol=1e-5, rng=None, max_attempts=100):
    """
    Compare backward VJPs against central differences of the forward.

    The backward is applied to every basis cotangent e_i; row i of the
    result must match row i of the numeric Jacobian in z (and in the finite
    entries of u, for constrained transforms).

    The check is only meaningful where a +-h perturbation of any input keeps
    the active set. If ``(z, u)`` is not such a point and ``rng`` is given, a
    fresh instance of the same size is drawn (up to ``max_attempts`` times);
    without ``rng`` the unstable point raises immediately.

    Returns
    -------
    OracleReport with one instance.

    Raises
    ------
    UnstableActiveSet
    """
    tr = get_transform(transform) if isinstance(transform, str) else transform
    z = np.asarray(z, dtype=float).copy()
    J = z.shape[0]
    u = None if (u is None or not tr.constrained) else np.asarray(u, dtype=float).copy()

    for _ in range(max_attempts):
        alpha, cert = tr.forward(z, u)
        if _stable(tr.forward, z, u, h, _partition(cert)):
            break
        if rng is None:
            raise UnstableActiveSet("active set changes under a +-h perturbation")
        z, u_new = random_instance(rng, J)
        u = u_new if tr.constrained else None
    else:
        raise UnstableActiveSet(f"no stable point after {max_attempts} attempts")

    jz, ju = _numeric_jacobians(tr.forward, z, u, h)
    bz = np.zeros((J, J))
    bu = np.zeros((J, J))
    for i in range(J):
        e = np.zeros(J)
        e[i] = 1.0
        dz, du = tr.backward(alpha, cert, e)
        bz[i] = dz
        bu[i] = du
    err = max(float(np.max(np.abs(jz - bz))), float(np.max(np.abs(ju - bu))))
    report = OracleReport(tolerance=tol)
    report.add(err, {"z": z.tolist(), "u": None if u is None else u.tolist()}, None, None)
    return report


# ---------------------------------------------------------------------------
# suites


def _oracle_for(name):
    if name in ("csparsemax", "sparsemax"):
        return oracle_csparsemax
    if name in ("csoftmax", "softmax"):
        return oracle_csoftmax
    raise ValueError(f"no oracle for transform {name!r}")


def forward_suite(transform, trials, seed, jmax=8, tol=1e-8):
    """
    Compare a forward against its brute-force oracle on ``trials`` seeded
    instances for each J in 1..jmax. Unconstrained transforms are compared
    against the oracle with all bounds at +inf.
    """
    tr = get_transform(transform) if isinstance(transform, str) else transform
    oracle = _oracle_for(tr.name)
    rng = np.random.default_rng(seed)
    report = OracleReport(tolerance=tol)
    for J in range(1, jmax + 1):
        for _ in range(trials):
            z, u = random_instance(rng, J)
            if not tr.constrained:
                u = np.full(J, np.inf)
            expected = oracle(z, u)
            got = tr.forward(z, u if tr.constrained else None)[0]
            err = float(np.max(np.abs(expected - got)))
            report.add(err, {"z": z.tolist(), "u": u.tolist()}, expected.tolist(), got.tolist())
    return report


def gradient_suite(transform, trials, seed, jmax=8, h=1e-6, tol=1e-5):
    """Finite-difference checks at ``trials`` stable random points per J."""
    tr = get_transform(transform) if isinstance(transform, str) else transform
    rng = np.random.default_rng(seed)
    report = OracleReport(tolerance=tol)
    for J in range(1, jmax + 1):
        for _ in range(trials):
            z, u = random_instance(rng, J)
            report.merge(finite_diff_check(tr, z, u, h=h, tol=tol, rng=rng))
    return report
