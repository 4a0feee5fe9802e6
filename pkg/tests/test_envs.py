import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dssbo.envs.base import evaluate_policy, run_episode, sample_states, zero_policy
from dssbo.envs.drone import DroneConfig, DroneWorld, nearest_point_controller
from dssbo.envs.pursuit import PursuitConfig, PursuitWorld, chase_controller
from dssbo.envs.rewards import RewardMode, RewardWrapper, wrap_rewards
from dssbo.envs.synthetic import SyntheticAdditive, make_synthetic
from dssbo.errors import ContractViolation
from dssbo.graph import DependencyGraph, ErdosRenyiSpec
from dssbo.hessian import fd_hessian
from dssbo.hom import HomLayout, HomPolicy


# drone world -------------------------------------------------------------------

def test_stationary_drones_only_pay_fuel_out_once():
    env = DroneWorld(DroneConfig(n_drones=3, epoch_len=200))
    env.reset(0, fuel=[0.05, 0.2, 0.31])
    penalties = np.zeros(3)
    delivered = 0.0
    for _ in range(200):
        env.step(np.zeros((3, 2)))
        r = env.last_rewards
        penalties += r == env.cfg.fuel_out_penalty
        delivered += r[r > 0].sum()
    assert delivered == 0.0
    np.testing.assert_array_equal(penalties, [1, 1, 1])
    assert np.all(env.inert)


def test_head_on_collision():
    env = DroneWorld(DroneConfig(n_drones=2, n_points=1))
    env.reset(0, pos=[[0.5, 0.5], [0.56, 0.5]], vel=[[0.01, 0.0], [-0.01, 0.0]], fuel=[1.0, 1.0],
              points=[[0.1, 0.9]])
    env.step(np.zeros((2, 2)))
    np.testing.assert_allclose(env.last_rewards, [env.cfg.collision_penalty] * 2)
    assert np.all(env.vel == 0.0)


def test_straight_flight_delivery_reward():
    d = 0.6
    env = DroneWorld(DroneConfig(n_drones=1, n_points=1, epoch_len=200))
    obs = env.reset(1, pos=[[0.2, 0.2]], fuel=[1.0], points=[[0.2 + d, 0.2]])
    ctrl = nearest_point_controller(env)
    for _ in range(200):
        obs, r = env.step(ctrl(obs))
        if r > 0:
            break
    assert r == pytest.approx(env.cfg.delivery_base * d**2, rel=1e-12)
    assert env.fuel[0] == 1.0


def test_drone_invariants_under_random_actions():
    cfg = DroneConfig()
    env = DroneWorld(cfg)
    lo = cfg.fuel_out_penalty + cfg.collision_penalty
    hi = cfg.delivery_base * cfg.d_max**2
    rng = np.random.default_rng(0)
    for seed in range(10):
        env.reset(seed)
        fuel = env.fuel.copy()
        for _ in range(cfg.epoch_len):
            env.step(rng.uniform(-3, 3, (3, 2)))
            r = env.last_rewards
            assert np.all((r >= lo - 1e-12) & (r <= hi + 1e-12))
            assert np.all((env.pos >= 0) & (env.pos <= 1))
            refuel = r > 0
            assert np.all(env.fuel[refuel] == 1.0)
            assert np.all(env.fuel[~refuel] <= fuel[~refuel])
            fuel = env.fuel.copy()


def test_zero_weight_policy_equals_stationary():
    env = DroneWorld()
    lay = HomLayout(env.n_agents, env.state_dim, env.action_dim)
    pol = HomPolicy(lay, np.full(lay.size, 0.5))
    for seed in range(3):
        assert evaluate_policy(env, pol, seed) == evaluate_policy(env, zero_policy(env), seed)


def test_policy_return_is_deterministic():
    env = DroneWorld()
    lay = HomLayout(env.n_agents, env.state_dim, env.action_dim)
    th = np.random.default_rng(3).uniform(size=lay.size)
    a = evaluate_policy(env, HomPolicy(lay, th), 7, repeats=2)
    b = evaluate_policy(DroneWorld(), HomPolicy(lay, th.copy()), 7, repeats=2)
    assert a == b


def test_non_finite_actions_become_zero_and_are_flagged():
    env = DroneWorld(DroneConfig(epoch_len=5))

    def bad(obs):
        a = np.zeros((3, 2))
        a[1, 0] = np.nan
        return a

    total, trace = run_episode(env, bad, 0, record=True)
    ref, _ = run_episode(DroneWorld(DroneConfig(epoch_len=5)), zero_policy(env), 0)
    assert total == ref
    assert trace.bad_action_steps == [1, 2, 3, 4, 5]


def test_episode_trace_file_is_reproducible(tmp_path):
    env = DroneWorld(DroneConfig(epoch_len=20))
    ctrl = nearest_point_controller(env)
    for name in ("a.tsv", "b.tsv"):
        _, tr = run_episode(env, ctrl, 4, RewardMode.sparse(5), record=True)
        tr.write(tmp_path / name)
    text = (tmp_path / "a.tsv").read_text()
    assert text == (tmp_path / "b.tsv").read_text()
    header = text.splitlines()[0].split("\t")
    assert header[0] == "step" and header[-2:] == ["reward", "emitted"]
    assert len(text.splitlines()) == 21


def test_scripted_single_drone_scores_well():
    env = DroneWorld(DroneConfig(n_drones=1))
    assert all(evaluate_policy(env, nearest_point_controller(env), s) > 5 for s in range(5))


def test_sample_states_shape_and_determinism():
    env = DroneWorld()
    a = sample_states(env, 4, 3)
    assert a.shape == (4, 3, 7)
    np.testing.assert_array_equal(a, sample_states(env, 4, 3))


# pursuit -------------------------------------------------------------------------

@pytest.mark.parametrize("het", [False, True])
def test_chase_beats_zero_policy(het):
    env = PursuitWorld(PursuitConfig(heterogeneous=het))
    for seed in range(5):
        chase = evaluate_policy(env, chase_controller(env), seed)
        assert chase > 0
        assert chase >= evaluate_policy(env, zero_policy(env), seed)


def test_capture_rewards_and_respawns():
    env = PursuitWorld(PursuitConfig(n_predators=1))
    env.reset(0, pos=[[0.5, 0.5]], prey=[0.52, 0.5])
    _, r = env.step(np.zeros((1, 2)))
    assert r == env.cfg.capture_reward
    assert np.linalg.norm(env.prey - env.pos[0]) >= env.cfg.respawn_gap


def test_pursuit_arena_bounded():
    env = PursuitWorld(PursuitConfig(heterogeneous=True))
    rng = np.random.default_rng(1)
    env.reset(2)
    for _ in range(300):
        env.step(rng.uniform(-1, 1, (3, 2)))
        assert np.all((env.pos >= 0) & (env.pos <= 1))
        assert np.all((env.prey >= 0) & (env.prey <= 1))
    np.testing.assert_array_equal(env.speed, [1.0, 0.7, 0.5])


# synthetic additive objectives ----------------------------------------------------

def test_empty_graph_is_diagonal():
    obj = make_synthetic(ErdosRenyiSpec(6, 1e-9, 0))
    assert obj.cliques == [(i,) for i in range(6)]
    H = obj.hessian(np.full(6, 0.3))
    assert np.all(H == np.diag(np.diag(H)))


def test_argmax_gives_stored_maximum():
    obj = make_synthetic(ErdosRenyiSpec(6, 0.3, 2))
    assert obj(obj.argmax) == obj.maximum
    X = np.random.default_rng(0).uniform(size=(5000, 6))
    assert max(obj.value(x) for x in X) <= obj.maximum + 1e-9


def test_clique_sum_equals_monolithic():
    obj = make_synthetic(ErdosRenyiSpec(8, 0.3, 5))
    rng = np.random.default_rng(1)
    for _ in range(1000):
        th = rng.uniform(size=8)
        # independent monolithic form written from the component parameters
        total = 0.0
        for c in obj.components:
            x = th[list(c.dims)]
            z = x - c.centre
            total += -z @ c.A @ z + c.amp * math.sin(math.pi * float(c.freq @ x))
        assert abs(obj.clique_sum(th).sum() - total) <= 1e-12
        assert abs(obj.value(th) - total) <= 1e-12


def test_non_edge_cross_partials_vanish():
    obj = make_synthetic(ErdosRenyiSpec(7, 0.3, 6))
    A = obj.graph.adjacency() | np.eye(7, dtype=bool)
    rng = np.random.default_rng(2)
    for _ in range(5):
        th = rng.uniform(0.05, 0.95, 7)
        assert np.all(obj.hessian(th)[~A] == 0.0)
        assert np.max(np.abs(fd_hessian(obj.value, th)[~A])) <= 1e-3


def test_fd_agrees_with_analytic_hessian():
    obj = make_synthetic(ErdosRenyiSpec(5, 0.5, 7))
    rng = np.random.default_rng(3)
    for _ in range(10):
        th = rng.uniform(0.05, 0.95, 5)
        assert np.max(np.abs(obj.hessian(th) - fd_hessian(obj.value, th))) <= 1e-3


def test_synthetic_save_load(tmp_path):
    obj = make_synthetic(ErdosRenyiSpec(6, 0.4, 8), noise=0.1)
    obj.save(tmp_path / "obj.json")
    back = SyntheticAdditive.load(tmp_path / "obj.json")
    assert back.graph == obj.graph and back.maximum == obj.maximum
    th = np.random.default_rng(0).uniform(size=6)
    assert back.value(th) == obj.value(th)


def test_custom_graph_respected():
    g = DependencyGraph(4, [(0, 1), (1, 2)])
    obj = make_synthetic(ErdosRenyiSpec(4, 0.5, 0), graph=g)
    assert obj.cliques == [(0, 1), (1, 2), (3,)]


# reward wrappers ----------------------------------------------------------------

def test_period_one_is_identity():
    stream = [0.5, -1.0, 2.0, 0.0]
    assert wrap_rewards(stream, RewardMode.sparse(1)) == stream


def test_sparse_example():
    assert wrap_rewards(range(1, 11), RewardMode.sparse(5)) == [0, 0, 0, 0, 15, 0, 0, 0, 0, 40]


def test_sparse_flush():
    out = wrap_rewards([1.0] * 7, RewardMode.sparse(5))
    assert out == [0, 0, 0, 0, 5, 0, 2]
    assert sum(out) == 7


def test_delayed_emission_and_flush():
    w = RewardWrapper(RewardMode.delayed(2))
    assert [w.push(r) for r in (1.0, 2.0, 3.0, 4.0)] == [0.0, 0.0, 1.0, 2.0]
    assert w.flush() == 7.0


@settings(max_examples=200, deadline=None)
@given(stream=st.lists(st.floats(-1e6, 1e6), max_size=300), S=st.sampled_from([2, 5, 20, 50, 100, 200]))
def test_sparse_conservation_to_rounding(stream, S):
    out = wrap_rewards(stream, RewardMode.sparse(S))
    scale = max(1.0, sum(abs(r) for r in stream))
    assert abs(sum(out) - math.fsum(stream)) <= 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(stream=st.lists(st.integers(-1000, 1000), max_size=200), lag=st.integers(0, 50))
def test_delayed_conservation(stream, lag):
    out = wrap_rewards([r / 8 for r in stream], RewardMode.delayed(lag))
    assert sum(out) == sum(r / 8 for r in stream)


def test_sparse_mode_in_episodes_keeps_return():
    env = DroneWorld(DroneConfig(n_drones=1))
    ctrl = nearest_point_controller(env)
    dense = evaluate_policy(env, ctrl, 2)
    for S in (2, 7, 150, 400):
        assert evaluate_policy(env, ctrl, 2, reward_mode=RewardMode.sparse(S)) == pytest.approx(dense, abs=1e-12)


def test_reward_mode_validation():
    with pytest.raises(ContractViolation):
        RewardMode("bursty")
    with pytest.raises(ContractViolation):
        RewardMode.sparse(0)
