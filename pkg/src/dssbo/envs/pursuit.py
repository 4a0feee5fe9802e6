"""Predator-prey pursuit on the unit square.

The prey is faster than every predator and flees straight away from the
nearest one, bouncing off walls, so a lone chaser only wins by pinning it
against the boundary. Any predator inside the capture radius earns the team
``capture_reward`` and the prey respawns away from the pack.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PursuitConfig:
    n_predators: int = 3
    epoch_len: int = 150
    heterogeneous: bool = False
    speed_factors: tuple = (1.0, 0.7, 0.5)
    vmax: float = 0.03
    accel: float = 0.01
    prey_speed_ratio: float = 1.3
    capture_radius: float = 0.08
    capture_reward: float = 1.0
    respawn_gap: float = 0.3


def _reflect(x):
    x = np.where(x < 0, -x, x)
    return np.where(x > 1, 2.0 - x, x)


class PursuitWorld:
    state_dim = 7
    action_dim = 2

    def __init__(self, cfg: PursuitConfig = PursuitConfig()):
        self.cfg = cfg
        self.n_agents = cfg.n_predators
        self.epoch_len = cfg.epoch_len
        n = cfg.n_predators
        if cfg.heterogeneous:
            self.speed = np.array([cfg.speed_factors[i % len(cfg.speed_factors)] for i in range(n)])
        else:
            self.speed = np.ones(n)

    def reset(self, seed: int, pos=None, prey=None) -> np.ndarray:
        self.rng = np.random.default_rng([int(seed), 13])
        n = self.n_agents
        self.pos = self.rng.uniform(0, 1, (n, 2)) if pos is None else np.array(pos, dtype=float)
        self.vel = np.zeros((n, 2))
        self.prey = self._respawn() if prey is None else np.array(prey, dtype=float)
        self.captures = 0
        self.t = 0
        return self.observe()

    def _respawn(self):
        for _ in range(100):
            p = self.rng.uniform(0, 1, 2)
            if np.min(np.linalg.norm(self.pos - p, axis=1)) >= self.cfg.respawn_gap:
                return p
        return p

    def positions(self) -> np.ndarray:
        return np.vstack([self.pos, self.prey])

    def observe(self) -> np.ndarray:
        vmax = self.cfg.vmax * self.speed
        rel = self.prey[None, :] - self.pos
        return np.column_stack([self.pos, self.vel / vmax[:, None], rel, self.speed])

    def step(self, actions) -> tuple[np.ndarray, float]:
        c = self.cfg
        a = np.clip(np.asarray(actions, dtype=float).reshape(self.n_agents, 2), -1.0, 1.0)
        vmax = c.vmax * self.speed
        vel = self.vel + (c.accel * self.speed)[:, None] * a
        sp = np.linalg.norm(vel, axis=1)
        over = sp > vmax
        vel[over] *= (vmax[over] / sp[over])[:, None]
        pos = self.pos + vel
        vel[(pos < 0) | (pos > 1)] = 0.0
        self.pos, self.vel = np.clip(pos, 0.0, 1.0), vel

        d = np.linalg.norm(self.pos - self.prey, axis=1)
        away = self.prey - self.pos[int(np.argmin(d))]
        norm = np.linalg.norm(away)
        if norm > 0:
            self.prey = _reflect(self.prey + c.prey_speed_ratio * c.vmax * away / norm)

        r = 0.0
        if np.min(np.linalg.norm(self.pos - self.prey, axis=1)) < c.capture_radius:
            r = c.capture_reward
            self.captures += 1
            self.prey = self._respawn()
        self.t += 1
        return self.observe(), r


def chase_controller(env: PursuitWorld):
    """Scripted policy: every predator accelerates straight at the prey."""
    def policy(obs):
        desired = obs[:, 4:6] - 0.5 * obs[:, 2:4] * env.cfg.vmax
        n = np.linalg.norm(desired, axis=1, keepdims=True)
        return np.where(n > 0, desired / np.maximum(n, 1e-12), 0.0)
    return policy
