"""
Attention transformations onto the probability simplex.

Four maps from scores ``z`` (and upper bounds ``u``) to attention weights:

    softmax(z)
    sparsemax(z)          Euclidean projection of z onto the simplex
    csoftmax(z, u)        KL projection of softmax(z) onto {alpha <= u}
    csparsemax(z, u)      Euclidean projection onto the simplex cut by [0, u]

The sparse and constrained forwards also return a ProjectionCertificate, the
partition of coordinates into free / zero / clipped sets plus the threshold.
The backward functions consume only the certificate (and alpha for csoftmax),
so their cost scales with the support rather than with J.
"""
from collections import namedtuple
from dataclasses import dataclass
import warnings

import numpy as np

from .errors import DegenerateActiveSetWarning, InfeasibleError
from .qk import map_csparsemax, solve_qk

__all__ = [
    "ProjectionCertificate",
    "softmax_forward",
    "softmax_backward",
    "sparsemax_forward",
    "sparsemax_backward",
    "csoftmax_forward",
    "csoftmax_backward",
    "csparsemax_forward",
    "csparsemax_backward",
    "certificate_violations",
    "Transform",
    "TRANSFORMS",
    "get_transform",
]

# absolute slack when reading the partition off a solver output
SET_TOL = 1e-12
# slack allowed on sum(u) >= 1
FEAS_TOL = 1e-12


@dataclass(frozen=True)
class ProjectionCertificate:
    """
    Active-set partition of a projection.

    ``free`` holds indices with 0 < alpha < u, ``zero`` those with alpha = 0
    and ``clipped`` those with alpha = u. For csparsemax and sparsemax ``tau``
    is the threshold in alpha = clamp(z - tau, 0, u); for csoftmax it stores
    the mass left for the free set, ``1 - sum(u[clipped])``.
    """

    tau: float
    free: np.ndarray
    zero: np.ndarray
    clipped: np.ndarray

    @property
    def size(self):
        return self.free.shape[0] + self.zero.shape[0] + self.clipped.shape[0]

    @property
    def degenerate(self):
        return self.free.shape[0] == 0

    def labels(self):
        """Per-coordinate labels: 0 zero, 1 free, 2 clipped."""
        out = np.empty(self.size, dtype=np.int8)
        out[self.zero] = 0
        out[self.free] = 1
        out[self.clipped] = 2
        return out

    def same_partition(self, other):
        return self.size == other.size and np.array_equal(self.labels(), other.labels())

    def to_dict(self):
        return {
            "tau": float(self.tau),
            "free": self.free.tolist(),
            "zero": self.zero.tolist(),
            "clipped": self.clipped.tolist(),
        }


def _idx(mask):
    return np.flatnonzero(mask).astype(np.intp)


def _check_scores(z):
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.shape[0] < 1:
        raise ValueError("scores must be a non-empty 1-d vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("scores must be finite")
    return z


def _check_bounds(u, size):
    u = np.asarray(u, dtype=float)
    if u.shape != (size,):
        raise ValueError(f"bounds have shape {u.shape}, expected ({size},)")
    if np.isnan(u).any() or np.any(u < 0):
        raise ValueError("bounds must be nonnegative (+inf allowed)")
    total = float(np.sum(u))
    if total < 1.0 - FEAS_TOL:
        raise InfeasibleError(f"infeasible bounds: sum(u) = {total!r} < 1")
    return u


# ---------------------------------------------------------------------------
# softmax


def softmax_forward(z):
    z = _check_scores(z)
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def softmax_backward(alpha, dalpha):
    """dz_j = alpha_j * (dalpha_j - <alpha, dalpha>)."""
    alpha = np.asarray(alpha, dtype=float)
    dalpha = np.asarray(dalpha, dtype=float)
    return alpha * (dalpha - np.dot(alpha, dalpha))


# ---------------------------------------------------------------------------
# sparsemax


def _threshold_certificate(z, u, tau):
    """Classify coordinates by r = z - tau and rebuild an exact solution."""
    r = z - tau
    zero = r <= SET_TOL
    clipped = ~zero & (r >= u - SET_TOL)
    free = ~(zero | clipped)
    n_free = np.count_nonzero(free)
    if n_free:
        tau = (np.sum(z[free]) + np.sum(u[clipped]) - 1.0) / n_free
    alpha = np.zeros_like(z)
    alpha[clipped] = u[clipped]
    alpha[free] = z[free] - tau
    cert = ProjectionCertificate(tau=float(tau), free=_idx(free), zero=_idx(zero), clipped=_idx(clipped))
    return alpha, cert


def sparsemax_forward(z):
    """
    Euclidean projection of ``z`` onto the probability simplex.

    Sort-based: the support is the largest k with 1 + k z_(k) > sum_{i<=k} z_(i).
    Returns ``(alpha, certificate)``; the certificate never has clipped entries.
    """
    z = _check_scores(z)
    zs = np.sort(z)[::-1]
    cs = np.cumsum(zs)
    k = np.arange(1, z.shape[0] + 1)
    support = k[1.0 + k * zs > cs][-1]
    tau = (cs[support - 1] - 1.0) / support
    return _threshold_certificate(z, np.full_like(z, np.inf), tau)


def sparsemax_backward(cert, dalpha):
    dalpha = np.asarray(dalpha, dtype=float)
    dz = np.zeros_like(dalpha)
    if cert.free.shape[0]:
        sub = dalpha[cert.free]
        dz[cert.free] = sub - np.mean(sub)
    return dz


# ---------------------------------------------------------------------------
# constrained softmax


def csoftmax_forward(z, u):
    """
    Constrained softmax: the distribution closest in KL to softmax(z) with
    alpha <= u.

    Coordinates are sorted by the ratio exp(z_j) / u_j and clipped greedily
    while the renormalized softmax still overshoots the bound, O(J log J).
    Returns ``(alpha, certificate)`` where ``certificate.tau`` holds the mass
    ``s = 1 - sum(u[clipped])`` assigned to the free set.

    Raises
    ------
    InfeasibleError
        If ``sum(u) < 1``.
    """
    z = _check_scores(z)
    u = _check_bounds(u, z.shape[0])
    J = z.shape[0]
    with np.errstate(divide="ignore"):
        log_u = np.log(u)
    order = np.lexsort((np.arange(J), -(z - log_u)))
    zo, uo, lo = z[order], u[order], log_u[order]

    # clipping the first k sorted coordinates leaves mass s_k for the rest,
    # normalized over Z_k = sum_{i >= k} exp(z_i)
    mass = 1.0 - np.concatenate([[0.0], np.cumsum(uo[:-1])])
    log_z = np.logaddexp.accumulate(zo[::-1])[::-1]
    live = mass > SET_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        # ties (alpha_j == u_j) count as clipped
        over = live & ((uo == 0) | (np.log(np.where(live, mass, 1.0)) + zo - log_z >= lo - SET_TOL))
    n_clip = int(np.argmin(over)) if not over.all() else J

    clipped_mask = np.zeros(J, dtype=bool)
    clipped_mask[order[:n_clip]] = True
    # once the clipped bounds use up all the mass, the rest get exactly zero
    zero_mask = np.zeros(J, dtype=bool)
    if n_clip < J and not live[n_clip]:
        zero_mask[order[n_clip:]] = True
    free = ~(clipped_mask | zero_mask)
    alpha = np.where(clipped_mask, u, 0.0)
    s = 1.0 - float(np.sum(u[clipped_mask]))
    if free.any():
        zf = z[free]
        e = np.exp(zf - np.max(zf))
        alpha[free] = s * e / np.sum(e)
    cert = ProjectionCertificate(tau=s, free=_idx(free), zero=_idx(zero_mask), clipped=_idx(clipped_mask))
    return alpha, cert


def _degenerate(cert, dalpha):
    warnings.warn(
        "empty free set in backward pass; returning dz=0 and du=dalpha on clipped coordinates",
        DegenerateActiveSetWarning,
        stacklevel=3,
    )
    dz = np.zeros_like(dalpha)
    du = np.zeros_like(dalpha)
    du[cert.clipped] = dalpha[cert.clipped]
    return dz, du


def csoftmax_backward(cert, alpha, dalpha):
    """
    Vector-Jacobian product of csoftmax.

    On the free set alpha_i = s exp(z_i) / Z_A with s = 1 - sum(u[clipped]),
    which gives

        dz_j = 1(j free) * alpha_j * (dalpha_j - m)
        du_j = 1(j clipped) * (dalpha_j - m),    m = <alpha_A, dalpha_A> / s.

    With no clipping this is the softmax backward.
    """
    alpha = np.asarray(alpha, dtype=float)
    dalpha = np.asarray(dalpha, dtype=float)
    s = cert.tau
    if cert.degenerate or s <= 0:
        return _degenerate(cert, dalpha)
    A, R = cert.free, cert.clipped
    m = float(np.dot(alpha[A], dalpha[A])) / s
    dz = np.zeros_like(dalpha)
    du = np.zeros_like(dalpha)
    dz[A] = alpha[A] * (dalpha[A] - m)
    du[R] = dalpha[R] - m
    return dz, du


# ---------------------------------------------------------------------------
# constrained sparsemax


def csparsemax_forward(z, u, pivot="median"):
    """
    Constrained sparsemax: Euclidean projection of ``z`` onto
    {alpha in simplex, alpha <= u}.

    Solved in expected linear time by rewriting it as a singly-constrained
    QP (see :mod:`constrained_attention.qk`). The solution has the form
    alpha_j = max(0, min(u_j, z_j - tau)).

    Returns ``(alpha, certificate)``.

    Raises
    ------
    InfeasibleError
        If ``sum(u) < 1``.
    """
    z = _check_scores(z)
    u = _check_bounds(u, z.shape[0])
    sol = solve_qk(map_csparsemax(z, u), pivot=pivot)
    # free coordinates satisfy alpha = z + 2y, i.e. tau = -2y
    return _threshold_certificate(z, u, -2.0 * sol.y)


def csparsemax_backward(cert, dalpha):
    """
    dz_j = 1(j free) (dalpha_j - m), du_j = 1(j clipped) (dalpha_j - m),
    with m the mean of dalpha over the free set. O(|free| + |clipped|).

    A fully saturated solution (empty free set) warns with
    DegenerateActiveSetWarning and returns dz = 0, du = dalpha on the
    clipped set.
    """
    dalpha = np.asarray(dalpha, dtype=float)
    if cert.degenerate:
        return _degenerate(cert, dalpha)
    A, R = cert.free, cert.clipped
    m = float(np.mean(dalpha[A]))
    dz = np.zeros_like(dalpha)
    du = np.zeros_like(dalpha)
    dz[A] = dalpha[A] - m
    du[R] = dalpha[R] - m
    return dz, du


# ---------------------------------------------------------------------------
# certificate checks


def certificate_violations(name, z, u, alpha, cert, tol=1e-9):
    """
    List every way ``(alpha, cert)`` fails the projection optimality
    conditions for transform ``name``. An empty list means the certificate
    holds.
    """
    z = np.asarray(z, dtype=float)
    J = z.shape[0]
    u = np.full(J, np.inf) if u is None else np.asarray(u, dtype=float)
    out = []
    if abs(float(np.sum(alpha)) - 1.0) > tol:
        out.append(f"sum(alpha) = {np.sum(alpha)!r}")
    if np.any(alpha < -tol):
        out.append("negative weight")
    if np.any(alpha > u + tol):
        out.append("bound exceeded")
    if cert is None:
        return out

    labels = np.concatenate([cert.free, cert.zero, cert.clipped])
    if labels.shape[0] != J or not np.array_equal(np.sort(labels), np.arange(J)):
        out.append("sets do not partition the coordinates")
        return out
    A, L, R = cert.free, cert.zero, cert.clipped
    if np.any(alpha[A] <= 0) or np.any(alpha[A] >= u[A]):
        out.append("free coordinate on a bound")
    if np.any(np.abs(alpha[L]) > tol):
        out.append("zero-set coordinate nonzero")
    if np.any(np.abs(alpha[R] - u[R]) > tol):
        out.append("clipped coordinate off its bound")
    if A.shape[0] == 0 and abs(float(np.sum(u[R])) - 1.0) > tol:
        out.append("empty free set without saturation")

    if name in ("sparsemax", "csparsemax"):
        r = z - cert.tau
        if np.any(np.abs(alpha[A] - r[A]) > tol):
            out.append("stationarity: alpha != z - tau on free set")
        if np.any(r[L] > tol):
            out.append("slackness: z - tau > 0 on zero set")
        if np.any(r[R] < u[R] - tol):
            out.append("slackness: z - tau < u on clipped set")
        if A.shape[0]:
            expect = (np.sum(z[A]) + np.sum(u[R]) - 1.0) / A.shape[0]
            if abs(expect - cert.tau) > tol:
                out.append("threshold does not normalize")
    elif name == "csoftmax":
        s = cert.tau
        if L.shape[0] and A.shape[0]:
            out.append("csoftmax zero set next to a nonempty free set")
        if abs(s - (1.0 - float(np.sum(u[R])))) > tol:
            out.append("stored mass != 1 - sum(u[clipped])")
        if A.shape[0]:
            zA = z[A]
            e = np.exp(zA - np.max(zA))
            if np.any(np.abs(alpha[A] - s * e / np.sum(e)) > tol):
                out.append("free weights are not a rescaled softmax")
            # clipped coordinates would overshoot their bound if released
            scale = s / np.sum(np.exp(zA - np.max(z)))
            if np.any(scale * np.exp(z[R] - np.max(z)) < u[R] - tol):
                out.append("clipped coordinate would not exceed its bound")
    return out


# ---------------------------------------------------------------------------
# uniform interface used by the session driver, oracles and the CLI

Transform = namedtuple("Transform", ["name", "forward", "backward", "constrained"])


def _fw_softmax(z, u=None):
    return softmax_forward(z), None


def _bw_softmax(alpha, cert, dalpha):
    return softmax_backward(alpha, dalpha), np.zeros_like(np.asarray(dalpha, dtype=float))


def _fw_sparsemax(z, u=None):
    return sparsemax_forward(z)


def _bw_sparsemax(alpha, cert, dalpha):
    return sparsemax_backward(cert, dalpha), np.zeros_like(np.asarray(dalpha, dtype=float))


def _bw_csoftmax(alpha, cert, dalpha):
    return csoftmax_backward(cert, alpha, dalpha)


def _bw_csparsemax(alpha, cert, dalpha):
    return csparsemax_backward(cert, dalpha)


TRANSFORMS = {
    "softmax": Transform("softmax", _fw_softmax, _bw_softmax, False),
    "sparsemax": Transform("sparsemax", _fw_sparsemax, _bw_sparsemax, False),
    "csoftmax": Transform("csoftmax", csoftmax_forward, _bw_csoftmax, True),
    "csparsemax": Transform("csparsemax", csparsemax_forward, _bw_csparsemax, True),
}


def get_transform(name):
    """Look up a transform by name. ``forward(z, u) -> (alpha, cert)`` and
    ``backward(alpha, cert, dalpha) -> (dz, du)``."""
    try:
        return TRANSFORMS[name]
    except KeyError:
        raise ValueError(f"unknown transform {name!r}; expected one of {sorted(TRANSFORMS)}") from None
