import math

import numpy as np
import pytest

from dssbo.errors import ContractViolation
from dssbo.gp import AcquisitionConfig
from dssbo.graph import ErdosRenyiSpec
from dssbo.envs.synthetic import make_synthetic
from dssbo.optimize import (TRACE_FILE, BoSettings, RunTrace, read_trace, run_dss_gp_ucb, run_gp_ucb,
                            run_random_search, write_trace)
from dssbo.structure import StructureSearchConfig

FAST = BoSettings(acquisition=AcquisitionConfig(n_random=64, n_keep=4, n_rounds=8))


def bowl(theta):
    return -float(np.sum((np.asarray(theta) - 0.6) ** 2))


def bowl_hessian(theta):
    return -2.0 * np.eye(len(theta))


def test_supplied_decomposition_equals_plain_run(tmp_path):
    cliques = [(0, 1), (2,)]
    a = run_dss_gp_ucb(bowl, None, 3, StructureSearchConfig(), 12, 5, FAST, cliques=cliques)
    b = run_gp_ucb(bowl, 3, 12, 5, FAST, cliques)
    write_trace(a, tmp_path / "a")
    write_trace(b, tmp_path / "b")
    assert (tmp_path / "a" / TRACE_FILE).read_bytes() == (tmp_path / "b" / TRACE_FILE).read_bytes()


def test_separable_bowl_recovers_singletons_and_optimum():
    for seed in range(5):
        tr = run_dss_gp_ucb(bowl, bowl_hessian, 4, StructureSearchConfig(), 60, seed, FAST,
                            true_value=bowl, optimum=0.0)
        assert [c.dims for c in tr.cliques] == [(0,), (1,), (2,), (3,)]
        assert tr.best_value() >= -0.05


def test_trace_conservation():
    obj = make_synthetic(ErdosRenyiSpec(5, 0.3, 2))
    cfg = StructureSearchConfig(T0=4, C1=3)
    tr = run_dss_gp_ucb(obj.value, obj.noisy_hessian(0.1, np.random.default_rng(0)), 5, cfg, 15, 0, FAST,
                        obj.value, obj.maximum)
    assert tr.n_objective_queries == 15 - 4
    assert tr.hessian_queries == 12
    hess_rows = [i for i, p in enumerate(tr.phase) if p == "hessian"]
    assert len(hess_rows) == 4
    phase1 = sum(3 * (obj.maximum - obj.value(tr.thetas[i])) for i in hess_rows)
    assert tr.cum_regret[hess_rows[-1]] == pytest.approx(phase1, rel=1e-12)
    assert tr.iteration == list(range(1, 16))
    assert all(math.isnan(tr.values[i]) for i in hess_rows)


def test_regret_accumulates_gaps():
    obj = make_synthetic(ErdosRenyiSpec(4, 0.3, 1))
    tr = run_random_search(obj.value, 4, 10, 0, obj.value, obj.maximum)
    gaps = np.cumsum([obj.maximum - v for v in tr.values])
    np.testing.assert_allclose(tr.cum_regret, gaps, rtol=1e-12)


def test_random_search_best_so_far_monotone():
    obj = make_synthetic(ErdosRenyiSpec(6, 0.2, 3))
    tr = run_random_search(obj, 6, 40, 1)
    assert all(b >= a for a, b in zip(tr.best_so_far, tr.best_so_far[1:]))
    assert tr.best_so_far[-1] == max(tr.values)


def test_unit_batch_equals_sequential():
    a = run_gp_ucb(bowl, 2, 8, 3, FAST)
    b = run_gp_ucb(bowl, 2, 8, 3, BoSettings(acquisition=FAST.acquisition, batch_size=1))
    np.testing.assert_array_equal(np.array(a.thetas), np.array(b.thetas))


def test_batches_fill_budget_with_distinct_points():
    s = BoSettings(acquisition=FAST.acquisition, batch_size=4)
    tr = run_gp_ucb(bowl, 3, 10, 0, s)
    assert len(tr.values) == 10
    X = np.array(tr.thetas)
    for start in (0, 4, 8):
        blk = X[start:start + 4]
        for i in range(len(blk)):
            for j in range(i + 1, len(blk)):
                assert np.max(np.abs(blk[i] - blk[j])) > 1e-6


def test_non_finite_objective_aborts_with_partial_trace():
    calls = {"n": 0}

    def flaky(theta):
        calls["n"] += 1
        return math.nan if calls["n"] == 5 else bowl(theta)

    tr = run_gp_ucb(flaky, 2, 10, 0, FAST)
    assert tr.status == "aborted"
    assert len(tr.values) == 4
    assert "iteration 5" in tr.error


def test_budget_must_exceed_structure_phase():
    with pytest.raises(ContractViolation):
        run_dss_gp_ucb(bowl, bowl_hessian, 2, StructureSearchConfig(T0=5, C1=1), 5, 0, FAST)


def test_trace_round_trip(tmp_path):
    obj = make_synthetic(ErdosRenyiSpec(4, 0.4, 0))
    tr = run_dss_gp_ucb(obj.value, obj.noisy_hessian(0.05, np.random.default_rng(1)), 4,
                        StructureSearchConfig(T0=3, C1=2), 8, 2, FAST, obj.value, obj.maximum, seed=2)
    write_trace(tr, tmp_path)
    back = read_trace(tmp_path)
    assert back.phase == tr.phase and back.iteration == tr.iteration
    np.testing.assert_array_equal(np.array(back.thetas), np.array(tr.thetas))
    np.testing.assert_array_equal(back.values, tr.values)
    np.testing.assert_array_equal(back.cum_regret, tr.cum_regret)
    assert back.graph == tr.graph
    assert [c.dims for c in back.cliques] == [c.dims for c in tr.cliques]
    np.testing.assert_array_equal(back.hessian_sums, tr.hessian_sums)
    assert back.weights == tr.weights


def test_trace_rows_without_optimum_have_nan_regret():
    tr = RunTrace(D=1)
    tr.record("bo", 1, [0.5], 1.0, None)
    assert math.isnan(tr.cum_regret[0])
