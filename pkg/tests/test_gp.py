import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dssbo.errors import ContractViolation
from dssbo.gp import (JITTER, AcquisitionConfig, BetaMode, BetaSchedule, GpModel, beta_value,
                      select_lengthscale, ucb_acquire, ucb_value)
from dssbo.kernels import AdditiveKernel, KernelSpec, additive_eval

KERNELS = [
    ("rbf-full", lambda D: AdditiveKernel.full(D, KernelSpec("rbf", 0.3, 1.0))),
    ("matern-full", lambda D: AdditiveKernel.full(D, KernelSpec("matern52", 0.3, 1.0))),
    ("rbf-additive", lambda D: AdditiveKernel([(0, 1), (1, 2), (3,)], KernelSpec("rbf", 0.3, 0.5), D)),
    ("matern-additive", lambda D: AdditiveKernel([(0,), (1, 2, 3)], KernelSpec("matern52", 0.3, 0.5), D)),
]


def dense_posterior(k, X, y, noise, x):
    """GP posterior by direct dense solves. The mean uses K + noise*I; the
    variance keeps the factorisation jitter, as the model does."""
    K = np.array([[additive_eval(k, a, b) for b in X] for a in X])
    kx = np.array([additive_eval(k, x, a) for a in X])
    mean = kx @ np.linalg.solve(K + noise * np.eye(len(X)), y)
    var = additive_eval(k, x, x) - kx @ np.linalg.solve(K + (noise + JITTER) * np.eye(len(X)), kx)
    return mean, var


def test_prior_when_empty():
    k = AdditiveKernel([(0,), (1,)], KernelSpec("rbf", 0.2, 0.4), 2)
    m = GpModel.fit(k, np.zeros((0, 2)), [])
    mean, var = m.posterior([0.3, 0.6])
    assert mean == 0.0
    assert var == pytest.approx(0.8)


@pytest.mark.parametrize("name,make", KERNELS)
def test_noiseless_interpolation(name, make):
    rng = np.random.default_rng(1)
    D = 4
    k = make(D)
    X = rng.uniform(size=(20, D))
    y = rng.standard_normal(20)
    m = GpModel.fit(k, X, y, noise_var=0.0)
    mean, var = m.posterior_batch(X)
    assert np.max(np.abs(mean - y)) <= 1e-6
    assert np.max(var) <= 1e-6


@pytest.mark.parametrize("name,make", KERNELS)
def test_two_point_posterior_matches_dense_solve(name, make):
    D = 4
    k = make(D)
    X = np.array([[0.1, 0.2, 0.3, 0.4], [0.6, 0.5, 0.9, 0.2]])
    y = np.array([0.7, -1.2])
    m = GpModel.fit(k, X, y, noise_var=0.01)
    for x in (np.array([0.3, 0.3, 0.5, 0.5]), np.array([0.9, 0.1, 0.2, 0.8]), X[0]):
        mean, var = m.posterior(x)
        ref_m, ref_v = dense_posterior(k, X, y, 0.01, x)
        assert mean == pytest.approx(ref_m, abs=1e-10)
        assert var == pytest.approx(ref_v, abs=1e-10)


def test_cholesky_reconstructs_regularised_gram():
    rng = np.random.default_rng(2)
    k = AdditiveKernel.full(3, KernelSpec())
    X = rng.uniform(size=(12, 3))
    m = GpModel.fit(k, X, rng.standard_normal(12), noise_var=0.05)
    target = k.gram(X) + (0.05 + JITTER) * np.eye(12)
    np.testing.assert_allclose(m.chol @ m.chol.T, target, atol=1e-8)


def test_condition_returns_new_model():
    k = AdditiveKernel.full(2, KernelSpec())
    m0 = GpModel.fit(k, [[0.2, 0.2]], [1.0])
    m1 = m0.condition([0.8, 0.8], 0.5)
    assert m0.n_obs == 1 and m1.n_obs == 2


def test_mismatched_observations_rejected():
    k = AdditiveKernel.full(2, KernelSpec())
    with pytest.raises(ContractViolation):
        GpModel.fit(k, np.zeros((3, 2)), np.zeros(2))


def _rff_component(rng, dims, n_feat=50, ls=0.3):
    W = rng.standard_normal((n_feat, len(dims))) / ls
    b = rng.uniform(0, 2 * np.pi, n_feat)
    a = rng.standard_normal(n_feat) * math.sqrt(2.0 / n_feat)
    return lambda X: np.cos(X[:, dims] @ W.T + b) @ a


def test_additive_kernel_explains_additive_draws_better():
    """Sums of independent per-clique random-feature draws get a higher
    marginal likelihood under the matching additive kernel."""
    wins = 0
    cliques = [(0, 1), (2, 3), (4, 5), (6, 7)]
    for seed in range(5):
        rng = np.random.default_rng(seed)
        comps = [_rff_component(rng, list(c)) for c in cliques]
        X = rng.uniform(size=(40, 8))
        y = sum(c(X) for c in comps)
        base = KernelSpec("rbf", 0.3, 1.0)
        lml_add = GpModel.fit(AdditiveKernel(cliques, base, 8), X, y, 1e-4).log_marginal_likelihood()
        lml_full = GpModel.fit(AdditiveKernel.full(8, base), X, y, 1e-4).log_marginal_likelihood()
        wins += lml_add > lml_full
    assert wins >= 4


def test_lengthscale_grid_picks_generating_scale():
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(60, 1))
    y = np.sin(12 * X[:, 0])
    k = select_lengthscale(AdditiveKernel.full(1, KernelSpec("rbf", 0.8, 1.0)), X, y, 1e-4)
    assert k.base.lengthscale in (0.1, 0.2)


# exploration schedule -------------------------------------------------------

def test_practical_beta_example():
    s = BetaSchedule(BetaMode.PRACTICAL, delta=1.0)
    assert beta_value(s, 1, 1) == pytest.approx(2 * math.log(math.pi**2 / 6), rel=1e-14)
    assert beta_value(s, 1, 1) == pytest.approx(0.995401, abs=1e-6)


def test_theoretical_beta_formula():
    s = BetaSchedule(BetaMode.THEORETICAL, delta=1.0, a=1.0, b=1.0, r=1.0)
    first = 2 * math.log(2 * math.pi**2 / 3)
    second = 2 * 1 * math.log(1 * 1 * 1 * 1 * math.sqrt(math.log(4)))
    assert beta_value(s, 1, 1) == pytest.approx(first + second, rel=1e-14)


def test_theoretical_beta_shift_and_clamp():
    s = BetaSchedule(BetaMode.THEORETICAL, delta=0.1, offset=50)
    assert beta_value(s, 10, 3) == beta_value(s, 51, 3)  # both clamp to t~ = 1
    assert beta_value(s, 52, 3) > beta_value(s, 51, 3)


@pytest.mark.parametrize("mode", ["practical", "theoretical"])
def test_beta_positive_and_non_decreasing(mode):
    s = BetaSchedule(mode, delta=0.1, offset=7)
    vals = [beta_value(s, t, 5) for t in range(1, 1001)]
    assert all(v > 0 for v in vals)
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_beta_rejects_t_zero():
    with pytest.raises(ContractViolation):
        beta_value(BetaSchedule(), 0, 2)


# acquisition ---------------------------------------------------------------

def test_flat_posterior_returns_first_probe():
    k = AdditiveKernel.full(3, KernelSpec())
    m = GpModel.fit(k, np.zeros((0, 3)), [])
    x = ucb_acquire(m, 2.0, rng=123)
    first = np.random.default_rng(123).uniform(size=(AcquisitionConfig().n_random, 3))[0]
    np.testing.assert_array_equal(x, first)


def test_low_observation_pushes_acquisition_away():
    k = AdditiveKernel.full(1, KernelSpec("rbf", 0.2, 1.0))
    m = GpModel.fit(k, [[0.5]], [-2.0], noise_var=1e-4)
    grid = np.linspace(0, 1, 1001).reshape(-1, 1)
    vals = ucb_value(m, 4.0, grid)
    best_grid = grid[np.argmax(vals), 0]
    x = ucb_acquire(m, 4.0, rng=0)
    assert abs(x[0] - 0.5) >= 0.2
    assert abs(best_grid - 0.5) >= 0.2
    assert ucb_value(m, 4.0, x[None])[0] >= vals.max() - 1e-6


def test_zero_beta_maximises_mean():
    rng = np.random.default_rng(4)
    k = AdditiveKernel.full(1, KernelSpec("rbf", 0.2, 1.0))
    X = rng.uniform(size=(6, 1))
    m = GpModel.fit(k, X, np.sin(6 * X[:, 0]), noise_var=1e-4)
    grid = np.linspace(0, 1, 1001).reshape(-1, 1)
    mean, _ = m.posterior_batch(grid)
    x, val = ucb_acquire(m, 0.0, rng=1, return_value=True)
    assert val == pytest.approx(m.posterior(x)[0], abs=1e-12)
    starts = np.random.default_rng(1).uniform(size=(AcquisitionConfig().n_random, 1))
    assert val >= m.posterior_batch(starts)[0].max()
    assert val >= mean.max() - 1e-4


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), beta=st.floats(0.0, 10.0))
def test_acquisition_beats_every_random_start(seed, beta):
    rng = np.random.default_rng(seed)
    k = AdditiveKernel([(0, 1), (2,)], KernelSpec(), 3)
    X = rng.uniform(size=(8, 3))
    m = GpModel.fit(k, X, rng.standard_normal(8), 1e-3)
    cfg = AcquisitionConfig(n_random=64, n_keep=4, n_rounds=6)
    x, val = ucb_acquire(m, beta, cfg, rng=seed, return_value=True)
    starts = np.random.default_rng(seed).uniform(size=(64, 3))
    assert val >= ucb_value(m, beta, starts).max() - 1e-12
    assert val == pytest.approx(ucb_value(m, beta, x[None])[0], abs=1e-9)


def test_acquisition_is_deterministic():
    k = AdditiveKernel.full(2, KernelSpec())
    m = GpModel.fit(k, [[0.1, 0.9], [0.7, 0.3]], [0.2, 1.0], 1e-3)
    np.testing.assert_array_equal(ucb_acquire(m, 3.0, rng=5), ucb_acquire(m, 3.0, rng=5))
