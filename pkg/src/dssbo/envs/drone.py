"""Drone delivery on the unit square.

Each drone accelerates in 2-D, burns fuel faster at high speed and earns
``delivery_base * trip**2`` on reaching a delivery point, where ``trip`` is
the distance from where its current trip started to the point. Delivering
refuels the drone and respawns the point. Collisions and running dry cost a
little; a drone that runs dry stays grounded for the rest of the epoch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DroneConfig:
    n_drones: int = 3
    n_points: int = 3
    epoch_len: int = 150
    delivery_base: float = 10.0
    collision_penalty: float = -0.1
    fuel_out_penalty: float = -0.1
    collision_radius: float = 0.05
    delivery_radius: float = 0.05
    accel: float = 0.01
    vmax: float = 0.05
    drain: float = 0.002
    drain_quad: float = 4.0
    fuel_init: tuple = (0.2, 1.0)
    min_spawn_gap: float = 0.1

    @property
    def d_max(self) -> float:
        return math.sqrt(2.0)


class DroneWorld:
    state_dim = 7
    action_dim = 2

    def __init__(self, cfg: DroneConfig = DroneConfig()):
        self.cfg = cfg
        self.n_agents = cfg.n_drones
        self.epoch_len = cfg.epoch_len
        self.last_rewards = np.zeros(cfg.n_drones)

    # state ---------------------------------------------------------------
    def reset(self, seed: int, pos=None, vel=None, fuel=None, points=None) -> np.ndarray:
        c = self.cfg
        self.rng = np.random.default_rng([int(seed), 11])
        n = c.n_drones
        self.pos = self._spread(n) if pos is None else np.array(pos, dtype=float)
        self.vel = np.zeros((n, 2)) if vel is None else np.array(vel, dtype=float)
        self.fuel = self.rng.uniform(*c.fuel_init, n) if fuel is None else np.array(fuel, dtype=float)
        if points is None:
            points = np.array([self._spawn_point() for _ in range(c.n_points)])
        self.points = np.array(points, dtype=float).reshape(-1, 2)
        self.origin = self.pos.copy()
        self.inert = self.fuel <= 0
        self.t = 0
        self.last_rewards = np.zeros(n)
        return self.observe()

    def _spread(self, n):
        pts = []
        while len(pts) < n:
            p = self.rng.uniform(0.05, 0.95, 2)
            if all(np.linalg.norm(p - q) >= self.cfg.min_spawn_gap for q in pts):
                pts.append(p)
        return np.array(pts)

    def _spawn_point(self):
        for _ in range(100):
            p = self.rng.uniform(0.05, 0.95, 2)
            if np.all(np.linalg.norm(self.pos - p, axis=1) >= 2 * self.cfg.delivery_radius):
                return p
        return p

    def positions(self) -> np.ndarray:
        return self.pos

    def observe(self) -> np.ndarray:
        c = self.cfg
        d = self.points[None, :, :] - self.pos[:, None, :]
        near = np.argmin(np.linalg.norm(d, axis=2), axis=1)
        rel = d[np.arange(self.n_agents), near]
        return np.column_stack([self.pos, self.vel / c.vmax, self.fuel, rel])

    # dynamics ------------------------------------------------------------
    def step(self, actions) -> tuple[np.ndarray, float]:
        c = self.cfg
        a = np.clip(np.asarray(actions, dtype=float).reshape(self.n_agents, 2), -1.0, 1.0)
        active = ~self.inert
        r = np.zeros(self.n_agents)

        vel = self.vel + c.accel * a
        speed = np.linalg.norm(vel, axis=1)
        over = speed > c.vmax
        vel[over] *= (c.vmax / speed[over])[:, None]
        vel[~active] = 0.0
        pos = self.pos + vel
        hit = (pos < 0) | (pos > 1)
        vel[hit] = 0.0
        self.pos = np.clip(pos, 0.0, 1.0)
        self.vel = vel

        speed = np.linalg.norm(vel, axis=1) / c.vmax
        self.fuel = np.where(active, self.fuel - c.drain * (1.0 + c.drain_quad * speed**2), self.fuel)
        dry = active & (self.fuel <= 0)
        r[dry] += c.fuel_out_penalty
        self.inert |= dry
        self.vel[self.inert] = 0.0
        active = ~self.inert

        idx = np.nonzero(active)[0]
        crash = np.zeros(self.n_agents, dtype=bool)
        for k, i in enumerate(idx):
            for j in idx[k + 1:]:
                if np.linalg.norm(self.pos[i] - self.pos[j]) < c.collision_radius:
                    crash[i] = crash[j] = True
        r[crash] += c.collision_penalty
        self.vel[crash] = 0.0

        for i in idx:
            d = np.linalg.norm(self.points - self.pos[i], axis=1)
            k = int(np.argmin(d))
            if d[k] < c.delivery_radius:
                trip = float(np.linalg.norm(self.points[k] - self.origin[i]))
                r[i] += c.delivery_base * trip**2
                self.fuel[i] = 1.0
                self.origin[i] = self.pos[i].copy()
                self.points[k] = self._spawn_point()

        self.t += 1
        self.last_rewards = r
        return self.observe(), float(r.sum())


def nearest_point_controller(env: DroneWorld):
    """Scripted policy: accelerate toward the nearest point, braking on approach."""
    def policy(obs):
        rel = obs[:, 5:7]
        vel = obs[:, 2:4] * env.cfg.vmax
        desired = rel - 3.0 * vel
        n = np.linalg.norm(desired, axis=1, keepdims=True)
        return np.where(n > 0, desired / np.maximum(n, 1e-12), 0.0)
    return policy
