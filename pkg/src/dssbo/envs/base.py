"""Episode runner shared by the multi-agent environments."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .rewards import RewardMode, RewardWrapper


class MultiAgentEnv(Protocol):
    n_agents: int
    state_dim: int
    action_dim: int
    epoch_len: int

    def reset(self, seed: int) -> np.ndarray: ...

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, float]: ...

    def positions(self) -> np.ndarray: ...


@dataclass
class EpisodeTrace:
    positions: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    emitted: list = field(default_factory=list)
    bad_action_steps: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(self.rewards))

    def write(self, path) -> None:
        """Columnar text: step, per-agent positions, actions, reward, emitted reward."""
        n = len(self.positions[0]) if self.positions else 0
        ad = len(self.actions[0][0]) if self.actions else 0
        header = ["step"]
        header += [f"pos{i}_{c}" for i in range(n) for c in "xy"]
        header += [f"act{i}_{c}" for i in range(n) for c in range(ad)]
        header += ["reward", "emitted"]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t")
            w.writerow(header)
            for t in range(len(self.rewards)):
                row = [t + 1]
                row += [repr(float(v)) for v in np.ravel(self.positions[t])]
                row += [repr(float(v)) for v in np.ravel(self.actions[t])]
                row += [repr(self.rewards[t]), repr(self.emitted[t])]
                w.writerow(row)


def run_episode(env: MultiAgentEnv, policy: Callable[[np.ndarray], np.ndarray], seed: int,
                reward_mode: RewardMode = RewardMode(), record: bool = False):
    """One epoch from the seed-determined initial state.

    Returns (sum of emitted rewards, trace or None). Non-finite actions are
    replaced by zeros and the step is flagged in the trace.
    """
    obs = env.reset(seed)
    wrapper = RewardWrapper(reward_mode)
    trace = EpisodeTrace() if record else None
    total = 0.0
    for t in range(env.epoch_len):
        act = np.asarray(policy(obs), dtype=float).reshape(env.n_agents, env.action_dim)
        if not np.all(np.isfinite(act)):
            act = np.where(np.isfinite(act), act, 0.0)
            if trace is not None:
                trace.bad_action_steps.append(t + 1)
        obs, r = env.step(act)
        e = wrapper.push(r)
        if t == env.epoch_len - 1:
            e += wrapper.flush()
        total += e
        if trace is not None:
            trace.positions.append(env.positions().copy())
            trace.actions.append(act.copy())
            trace.rewards.append(float(r))
            trace.emitted.append(float(e))
    return total, trace


def evaluate_policy(env: MultiAgentEnv, policy: Callable, seed: int, repeats: int = 1,
                    reward_mode: RewardMode = RewardMode()) -> float:
    """Episode return, averaged over ``repeats`` consecutive seeds."""
    vals = [run_episode(env, policy, seed + k, reward_mode)[0] for k in range(repeats)]
    return float(np.mean(vals))


def zero_policy(env: MultiAgentEnv) -> Callable:
    return lambda obs: np.zeros((env.n_agents, env.action_dim))


def sample_states(env: MultiAgentEnv, n: int, seed: int,
                  policy: Callable | None = None, burn_in: Sequence[int] = (0, 50)) -> np.ndarray:
    """Joint states visited by ``policy`` (random actions by default), for
    surrogate Hessian queries."""
    rng = np.random.default_rng([seed, 7])
    out = np.empty((n, env.n_agents, env.state_dim))
    for k in range(n):
        obs = env.reset(int(rng.integers(2**31)))
        for _ in range(int(rng.integers(burn_in[0], burn_in[1] + 1))):
            act = policy(obs) if policy is not None else rng.uniform(-1, 1, (env.n_agents, env.action_dim))
            obs, _ = env.step(act)
        out[k] = obs
    return out
