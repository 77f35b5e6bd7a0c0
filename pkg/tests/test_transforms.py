import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from constrained_attention import (
    DegenerateActiveSetWarning,
    InfeasibleError,
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
from constrained_attention.oracles import finite_diff_check, random_instance

Z3 = np.array([1.2, 0.8, -0.2])


def test_softmax_examples():
    np.testing.assert_allclose(softmax_forward([0, 0]), [0.5, 0.5])
    for c in (-50.0, 0.0, 3.7, 800.0):
        np.testing.assert_allclose(softmax_forward([c, c, c]), [1 / 3] * 3)
    np.testing.assert_allclose(softmax_forward([np.log(4), 0]), [0.8, 0.2])


def test_softmax_no_overflow():
    a = softmax_forward([1000.0, 0.0])
    assert np.all(np.isfinite(a))
    assert a[0] == pytest.approx(1.0)


def test_softmax_backward_examples():
    np.testing.assert_allclose(softmax_backward([0.5, 0.5], [1, 0]), [0.25, -0.25])
    np.testing.assert_allclose(softmax_backward([0.5, 0.5], [3.0, 3.0]), [0, 0], atol=1e-15)


def test_sparsemax_examples():
    alpha, cert = sparsemax_forward(Z3)
    np.testing.assert_allclose(alpha, [0.7, 0.3, 0.0], atol=1e-12)
    assert cert.tau == pytest.approx(0.5)
    assert cert.clipped.size == 0
    np.testing.assert_allclose(sparsemax_forward([2.5, 2.5])[0], [0.5, 0.5])
    np.testing.assert_array_equal(sparsemax_forward([3, 0, 0])[0], [1, 0, 0])


def test_sparsemax_backward_examples():
    _, cert = sparsemax_forward(Z3)
    np.testing.assert_array_equal(cert.free, [0, 1])
    np.testing.assert_allclose(sparsemax_backward(cert, [1, 0, 0]), [0.5, -0.5, 0])
    np.testing.assert_allclose(sparsemax_backward(cert, [0.7, 0.7, 0.7]), [0, 0, 0])


def test_csoftmax_examples():
    np.testing.assert_allclose(csoftmax_forward([0, 0], [1, 1])[0], [0.5, 0.5])
    alpha, cert = csoftmax_forward([0, 0, 0], [0.2, 1, 1])
    np.testing.assert_allclose(alpha, [0.2, 0.4, 0.4])
    np.testing.assert_array_equal(cert.clipped, [0])
    assert cert.tau == pytest.approx(0.8)
    np.testing.assert_allclose(csoftmax_forward([np.log(4), 0], [0.6, 1])[0], [0.6, 0.4])


def test_csoftmax_backward_reduces_to_softmax():
    rng = np.random.default_rng(3)
    z = rng.normal(size=5)
    alpha, cert = csoftmax_forward(z, np.full(5, 2.0))
    assert cert.clipped.size == 0
    d = rng.normal(size=5)
    dz, du = csoftmax_backward(cert, alpha, d)
    np.testing.assert_allclose(dz, softmax_backward(alpha, d), atol=1e-15)
    np.testing.assert_array_equal(du, 0)


def test_csoftmax_backward_constant_cotangent():
    alpha, cert = csoftmax_forward([0.3, -0.1, 1.0, 0.2], [0.2, 0.5, 0.3, np.inf])
    assert cert.clipped.size > 0
    dz, du = csoftmax_backward(cert, alpha, np.full(4, 1.7))
    np.testing.assert_allclose(dz, 0, atol=1e-15)
    np.testing.assert_allclose(du, 0, atol=1e-15)


def test_csoftmax_finite_differences_j6():
    rng = np.random.default_rng(11)
    z, u = random_instance(rng, 6)
    rep = finite_diff_check("csoftmax", z, u, rng=rng)
    assert rep.ok and rep.max_abs_error <= 1e-5


def test_csparsemax_examples():
    alpha, cert = csparsemax_forward(Z3, [0.5, 1, 1])
    np.testing.assert_allclose(alpha, [0.5, 0.5, 0.0], atol=1e-12)
    assert cert.tau == pytest.approx(0.3)
    np.testing.assert_array_equal(cert.free, [1])
    np.testing.assert_array_equal(cert.clipped, [0])
    np.testing.assert_array_equal(cert.zero, [2])
    np.testing.assert_allclose(csparsemax_forward([0, 0], [0.3, 1])[0], [0.3, 0.7])


def test_csparsemax_unbounded_is_sparsemax():
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = rng.uniform(-2, 2, size=rng.integers(1, 10))
        a1, c1 = csparsemax_forward(z, np.full(z.shape, np.inf))
        a2, c2 = sparsemax_forward(z)
        np.testing.assert_allclose(a1, a2, atol=1e-12)
        assert c1.same_partition(c2)


def test_csparsemax_backward_example():
    _, cert = csparsemax_forward(Z3, [0.5, 1, 1])
    dz, du = csparsemax_backward(cert, [0.1, 0.3, -0.2])
    np.testing.assert_allclose(dz, [0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(du, [-0.2, 0, 0])


def test_csparsemax_backward_constant_cotangent():
    _, cert = csparsemax_forward(Z3, [0.5, 1, 1])
    dz, du = csparsemax_backward(cert, [0.4, 0.4, 0.4])
    np.testing.assert_array_equal(dz, 0)
    np.testing.assert_array_equal(du, 0)


def test_csparsemax_finite_differences_j8():
    rng = np.random.default_rng(5)
    z, u = random_instance(rng, 8)
    rep = finite_diff_check("csparsemax", z, u, rng=rng)
    assert rep.ok


def test_degenerate_backward_warns_and_falls_back():
    # bounds sum to exactly one, so every coordinate sits on its bound
    for fw, bw in ((csparsemax_forward, None), (csoftmax_forward, None)):
        alpha, cert = fw([0.0, 1.0], [0.25, 0.75])
        assert cert.degenerate
        np.testing.assert_allclose(alpha, [0.25, 0.75])
    _, cert = csparsemax_forward([0.0, 1.0], [0.25, 0.75])
    with pytest.warns(DegenerateActiveSetWarning):
        dz, du = csparsemax_backward(cert, [0.3, -0.5])
    np.testing.assert_array_equal(dz, 0)
    np.testing.assert_array_equal(du, [0.3, -0.5])
    alpha, cert = csoftmax_forward([0.0, 1.0], [0.25, 0.75])
    with pytest.warns(DegenerateActiveSetWarning):
        dz, du = csoftmax_backward(cert, alpha, [0.3, -0.5])
    np.testing.assert_array_equal(du, [0.3, -0.5])


@pytest.mark.parametrize("fw", [csoftmax_forward, csparsemax_forward])
def test_infeasible_bounds(fw):
    with pytest.raises(InfeasibleError, match="sum"):
        fw([0.0, 0.0], [0.3, 0.3])


@pytest.mark.parametrize("bad", [[], [np.nan, 1.0], [np.inf, 0.0]])
def test_invalid_scores(bad):
    with pytest.raises(ValueError):
        sparsemax_forward(bad)


def test_zero_bounds_get_zero_weight():
    for fw in (csoftmax_forward, csparsemax_forward):
        alpha, cert = fw([5.0, 0.0, 0.0], [0.0, 1.0, np.inf])
        assert alpha[0] == 0.0
        assert not certificate_violations(fw.__name__.split("_")[0], [5.0, 0.0, 0.0], [0.0, 1.0, np.inf], alpha, cert)


def test_tie_goes_to_closed_set():
    # z_3 - tau is exactly zero: classified as zero, not free
    _, cert = sparsemax_forward([1.0, 0.0, 0.0])
    np.testing.assert_array_equal(cert.free, [0])
    np.testing.assert_array_equal(cert.zero, [1, 2])


def test_certificate_violations_detects_corruption():
    alpha, cert = csparsemax_forward(Z3, [0.5, 1, 1])
    assert certificate_violations("csparsemax", Z3, [0.5, 1, 1], alpha, cert) == []
    bad = alpha.copy()
    bad[1] += 1e-6
    assert certificate_violations("csparsemax", Z3, [0.5, 1, 1], bad, cert)


# ---------------------------------------------------------------------------
# properties

scores = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=9).map(np.array)


@st.composite
def bounded(draw):
    z = draw(scores)
    u = np.array(draw(st.lists(st.floats(0.0, 1.5), min_size=len(z), max_size=len(z))))
    if draw(st.booleans()):
        u[-1] = np.inf
    if u.sum() < 1:
        u = u + (1.0 - u.sum()) / len(u) + 1e-3
    return z, u


@settings(max_examples=200, deadline=None)
@given(bounded())
def test_simplex_and_bound_feasibility(inst):
    z, u = inst
    for name in ("softmax", "sparsemax", "csoftmax", "csparsemax"):
        tr = get_transform(name)
        alpha, cert = tr.forward(z, u if tr.constrained else None)
        assert abs(alpha.sum() - 1) <= 1e-9
        assert np.all(alpha >= 0)
        if tr.constrained:
            assert np.all(alpha <= u + 1e-9)
        assert certificate_violations(name, z, u if tr.constrained else None, alpha, cert) == []


@settings(max_examples=150, deadline=None)
@given(bounded(), st.floats(-100, 100))
def test_shift_invariance(inst, c):
    z, u = inst
    a1, c1 = sparsemax_forward(z)
    a2, c2 = sparsemax_forward(z + c)
    np.testing.assert_allclose(a1, a2, atol=1e-9)
    a1, c1 = csparsemax_forward(z, u)
    a2, c2 = csparsemax_forward(z + c, u)
    np.testing.assert_allclose(a1, a2, atol=1e-9)


def test_shift_invariance_same_certificate():
    rng = np.random.default_rng(8)
    for _ in range(200):
        z, u = random_instance(rng, int(rng.integers(1, 9)))
        c = rng.uniform(-10, 10)
        _, c1 = csparsemax_forward(z, u)
        _, c2 = csparsemax_forward(z + c, u)
        assert c1.same_partition(c2)
        assert c2.tau - c1.tau == pytest.approx(c, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(bounded(), st.randoms(use_true_random=False))
def test_permutation_equivariance(inst, rnd):
    z, u = inst
    perm = list(range(len(z)))
    rnd.shuffle(perm)
    perm = np.array(perm)
    for name in ("softmax", "sparsemax", "csoftmax", "csparsemax"):
        tr = get_transform(name)
        a = tr.forward(z, u if tr.constrained else None)[0]
        ap = tr.forward(z[perm], u[perm] if tr.constrained else None)[0]
        np.testing.assert_allclose(ap, a[perm], atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(scores)
def test_sparsemax_monotone(z):
    alpha, _ = sparsemax_forward(z)
    order = np.argsort(z, kind="stable")
    assert np.all(np.diff(alpha[order]) >= -1e-12)


def test_backward_zero_cotangent():
    rng = np.random.default_rng(2)
    z, u = random_instance(rng, 6)
    for name in ("softmax", "sparsemax", "csoftmax", "csparsemax"):
        tr = get_transform(name)
        alpha, cert = tr.forward(z, u if tr.constrained else None)
        dz, du = tr.backward(alpha, cert, np.zeros(6))
        assert not dz.any() and not du.any()


def test_backward_is_sublinear_in_support():
    # only free and clipped coordinates are touched
    z = np.concatenate([[5.0, 4.9], np.full(998, -10.0)])
    u = np.concatenate([[0.4], np.full(999, 1.0)])
    _, cert = csparsemax_forward(z, u)
    assert cert.free.size + cert.clipped.size == 2
    dz, du = csparsemax_backward(cert, np.arange(1000.0))
    assert np.count_nonzero(dz) + np.count_nonzero(du) <= 2


def test_forward_is_pure():
    z = Z3.copy()
    u = np.array([0.5, 1.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        csparsemax_forward(z, u)
        csoftmax_forward(z, u)
    np.testing.assert_array_equal(z, Z3)
    np.testing.assert_array_equal(u, [0.5, 1, 1])
