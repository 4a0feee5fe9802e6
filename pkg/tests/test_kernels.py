import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dssbo.errors import ContractViolation, SingularInputError
from dssbo.kernels import (AdditiveKernel, Clique, Family, KernelSpec, additive_eval,
                           derivative_kernel, kernel_eval)

RBF = KernelSpec("rbf", 1.0, 1.0)


def matern_scalar(d, ls=1.0, var=1.0):
    # written out longhand, independent of the package
    r = d / ls
    return var * (1 + math.sqrt(5) * r + 5.0 * r * r / 3.0) * math.exp(-math.sqrt(5) * r)


@pytest.mark.parametrize("family", ["rbf", "matern52"])
@pytest.mark.parametrize("ls", [0.05, 0.3, 2.0])
def test_zero_distance_gives_variance(family, ls):
    spec = KernelSpec(family, ls, 0.7)
    x = np.array([0.2, 0.9, 0.4])
    assert kernel_eval(spec, x, x) == pytest.approx(0.7, abs=1e-15)


def test_rbf_unit_distance():
    assert kernel_eval(RBF, [0.0], [1.0]) == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert kernel_eval(RBF, [0.0], [1.0]) == pytest.approx(0.60653, abs=5e-6)


def test_matern_against_longhand():
    rng = np.random.default_rng(3)
    spec = KernelSpec("matern52", 0.4, 0.9)
    for _ in range(20):
        x, y = rng.uniform(size=4), rng.uniform(size=4)
        d = float(np.linalg.norm(x - y))
        assert kernel_eval(spec, x, y) == pytest.approx(matern_scalar(d, 0.4, 0.9), rel=1e-13)


def test_matern_matches_sklearn():
    sk = pytest.importorskip("sklearn.gaussian_process.kernels")
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(6, 3))
    ref = sk.Matern(length_scale=0.3, nu=2.5)(X)
    spec = KernelSpec("matern52", 0.3, 1.0)
    ours = np.array([[kernel_eval(spec, a, b) for b in X] for a in X])
    np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-14)


def test_kernel_eval_rejects_mismatched_lengths():
    with pytest.raises(ContractViolation):
        kernel_eval(RBF, [0.1, 0.2], [0.1])


def test_single_full_clique_equals_plain_kernel():
    rng = np.random.default_rng(5)
    for family in ("rbf", "matern52"):
        spec = KernelSpec(family, 0.35, 0.8)
        k = AdditiveKernel.full(5, spec)
        for _ in range(10):
            a, b = rng.uniform(size=5), rng.uniform(size=5)
            assert additive_eval(k, a, b) == pytest.approx(kernel_eval(spec, a, b), rel=1e-14)


def test_two_singletons_at_equal_points():
    spec = KernelSpec("matern52", 0.2, 0.6)
    k = AdditiveKernel([(1,), (2,)], spec, dim=3)
    th = np.array([0.3, 0.1, 0.8])
    assert additive_eval(k, th, th) == pytest.approx(1.2, abs=1e-15)


def test_overlapping_cliques_hand_computed():
    k = AdditiveKernel([(0, 1), (1, 2)], KernelSpec("rbf", 0.5, 1.0), dim=3)
    a = np.array([0.1, 0.4, 0.7])
    b = np.array([0.3, 0.2, 0.2])
    # {0,1}: squared distance 0.04 + 0.04 = 0.08; {1,2}: 0.04 + 0.25 = 0.29
    expected = math.exp(-0.5 * 0.08 / 0.25) + math.exp(-0.5 * 0.29 / 0.25)
    assert additive_eval(k, a, b) == pytest.approx(expected, rel=1e-14)


def test_clique_out_of_range():
    with pytest.raises(ContractViolation):
        AdditiveKernel([(0, 5)], dim=4)
    with pytest.raises(ContractViolation):
        Clique((2, 1))
    with pytest.raises(ContractViolation):
        Clique(())


def test_cross_matches_pointwise(backend):
    rng = np.random.default_rng(6)
    for family in ("rbf", "matern52"):
        k = AdditiveKernel([(0, 2), (1,), (2, 3, 4)], KernelSpec(family, 0.3, 0.5), dim=5)
        X, Y = rng.uniform(size=(7, 5)), rng.uniform(size=(4, 5))
        ref = np.array([[additive_eval(k, x, y) for y in Y] for x in X])
        np.testing.assert_allclose(k.cross(X, Y), ref, rtol=1e-13, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 30), D=st.integers(1, 10), family=st.sampled_from(["rbf", "matern52"]),
       ls=st.floats(0.05, 2.0), seed=st.integers(0, 2**31 - 1))
def test_gram_is_psd_with_jitter(n, D, family, ls, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(D)
    cuts = np.sort(rng.choice(np.arange(1, D), size=min(D - 1, rng.integers(0, 4)), replace=False)) if D > 1 else []
    cliques = [tuple(sorted(p)) for p in np.split(perm, cuts) if len(p)]
    k = AdditiveKernel(cliques, KernelSpec(family, ls, 1.0), dim=D)
    X = rng.uniform(size=(n, D))
    if n > 2:
        X[1] = X[0]  # duplicate rows are the hard case
    K = k.gram(X) + 1e-6 * np.eye(n)
    np.linalg.cholesky(K)


# derivative kernels ---------------------------------------------------------

def fd4(spec, i, j, a, b, h=1e-2):
    """Central difference of k in (a_i, b_i, a_j, b_j)."""
    total = 0.0
    for s1 in (1, -1):
        for s2 in (1, -1):
            for s3 in (1, -1):
                for s4 in (1, -1):
                    x, y = a.copy(), b.copy()
                    x[i] += s1 * h
                    y[i] += s2 * h
                    x[j] += s3 * h
                    y[j] += s4 * h
                    total += s1 * s2 * s3 * s4 * kernel_eval(spec, x, y)
    return total / (16 * h**4)


def test_rbf_derivative_at_zero_offset():
    spec = KernelSpec("rbf", 1.0, 0.7)
    th = np.array([0.2, 0.5, 0.9])
    assert derivative_kernel(spec, 0, 2, th, th) == pytest.approx(0.7, rel=1e-14)


def test_rbf_derivative_example():
    val = derivative_kernel(RBF, 0, 1, np.zeros(2), np.full(2, 0.5))
    assert val == pytest.approx(math.exp(-0.25) * 0.75**2, rel=1e-14)
    assert val == pytest.approx(0.438075, abs=1e-6)


@pytest.mark.parametrize("family,ls", [("rbf", 1.0), ("rbf", 0.4), ("matern52", 1.0), ("matern52", 0.5)])
def test_derivative_kernel_matches_fd(family, ls):
    spec = KernelSpec(family, ls, 1.0)
    rng = np.random.default_rng(7)
    for _ in range(10):
        D = int(rng.integers(2, 5))
        i, j = rng.choice(D, 2, replace=False)
        a, b = rng.uniform(size=D), rng.uniform(size=D)
        got = derivative_kernel(spec, int(i), int(j), a, b)
        assert got == pytest.approx(fd4(spec, int(i), int(j), a, b, h=1e-2 * ls), abs=1e-3 * max(1.0, abs(got)))


def test_matern_derivative_singular_at_zero():
    spec = KernelSpec("matern52")
    th = np.array([0.1, 0.2])
    with pytest.raises(SingularInputError):
        derivative_kernel(spec, 0, 1, th, th)


def test_derivative_kernel_diagonal_index_rejected():
    with pytest.raises(ContractViolation):
        derivative_kernel(RBF, 1, 1, np.zeros(2), np.ones(2))


def test_family_parsing():
    assert KernelSpec("RBF").family == Family.RBF
    assert KernelSpec().family == Family.MATERN52
