"""Additive test objectives with a known dependency graph and optimum."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from ..graph import DependencyGraph, ErdosRenyiSpec, max_cliques, sample_er_graph


@dataclass
class Component:
    """v(x) = -(x - m)^T A (x - m) + b * sin(pi * c . x) on the clique coordinates."""

    dims: tuple
    A: np.ndarray
    centre: np.ndarray
    amp: float
    freq: np.ndarray

    def value(self, theta: np.ndarray) -> float:
        x = theta[list(self.dims)]
        z = x - self.centre
        return float(-z @ self.A @ z + self.amp * math.sin(math.pi * float(self.freq @ x)))

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        x = theta[list(self.dims)]
        s = math.sin(math.pi * float(self.freq @ x))
        return -2.0 * self.A - self.amp * math.pi**2 * s * np.outer(self.freq, self.freq)

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "A": self.A.tolist(), "centre": self.centre.tolist(),
                "amp": self.amp, "freq": self.freq.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Component":
        return cls(tuple(d["dims"]), np.array(d["A"]), np.array(d["centre"]), float(d["amp"]),
                   np.array(d["freq"]))


class SyntheticAdditive:
    """Sum of random smooth components, one per maximal clique of an ER graph."""

    def __init__(self, D: int, graph: DependencyGraph, components: list, noise: float = 0.0,
                 argmax: np.ndarray | None = None, maximum: float | None = None, seed: int = 0):
        self.D = D
        self.graph = graph
        self.components = components
        self.noise = float(noise)
        self.seed = seed
        self._rng = np.random.default_rng([seed, 1])
        if argmax is None:
            argmax = self._locate_max()
        self.argmax = np.asarray(argmax, dtype=float)
        self.maximum = self.value(self.argmax) if maximum is None else float(maximum)

    @property
    def cliques(self):
        return [c.dims for c in self.components]

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(sum(c.value(theta) for c in self.components))

    def clique_sum(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array([c.value(theta) for c in self.components])

    def __call__(self, theta) -> float:
        v = self.value(theta)
        if self.noise > 0:
            v += self.noise * self._rng.standard_normal()
        return v

    def hessian(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        H = np.zeros((self.D, self.D))
        for c in self.components:
            idx = np.array(c.dims)
            H[np.ix_(idx, idx)] += c.hessian(theta)
        return H

    def noisy_hessian(self, sigma_n: float, rng: np.random.Generator):
        """Hessian oracle with i.i.d. N(0, sigma_n^2) noise on each unordered entry."""
        iu = np.triu_indices(self.D)

        def oracle(theta):
            H = self.hessian(theta)
            noise = np.zeros((self.D, self.D))
            noise[iu] = sigma_n * rng.standard_normal(len(iu[0]))
            return H + noise + np.triu(noise, 1).T

        return oracle

    def regret(self, theta) -> float:
        return self.maximum - self.value(theta)

    def _locate_max(self) -> np.ndarray:
        # components sharing a coordinate must be maximised jointly, so search
        # each connected component of the graph with multi-start L-BFGS-B
        rng = np.random.default_rng([self.seed, 2])
        best = np.full(self.D, 0.5)
        for comp in self.graph.components():
            comp = sorted(comp)
            parts = [c for c in self.components if set(c.dims) <= set(comp)]

            def negv(x):
                th = best.copy()
                th[comp] = x
                return -sum(p.value(th) for p in parts)

            k = len(comp)
            n_grid = 2048 if k > 1 else 0
            starts = rng.uniform(size=(n_grid, k)) if n_grid else np.zeros((0, k))
            if k == 1:
                starts = np.linspace(0, 1, 201).reshape(-1, 1)
            vals = np.array([negv(s) for s in starts])
            top = starts[np.argsort(vals)[:16]]
            winner, wval = None, math.inf
            for s in top:
                res = minimize(negv, s, method="L-BFGS-B", bounds=[(0.0, 1.0)] * k)
                if res.fun < wval:
                    winner, wval = np.clip(res.x, 0, 1), res.fun
            best[comp] = winner
        return best

    def to_dict(self) -> dict:
        return {"D": self.D, "graph": self.graph.to_dict(), "noise": self.noise, "seed": self.seed,
                "components": [c.to_dict() for c in self.components],
                "argmax": self.argmax.tolist(), "maximum": self.maximum}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticAdditive":
        return cls(d["D"], DependencyGraph.from_dict(d["graph"]),
                   [Component.from_dict(c) for c in d["components"]], d["noise"],
                   np.array(d["argmax"]), d["maximum"], d["seed"])

    @classmethod
    def load(cls, path) -> "SyntheticAdditive":
        return cls.from_dict(json.loads(Path(path).read_text()))


def make_synthetic(spec: ErdosRenyiSpec, noise: float = 0.0, graph: DependencyGraph | None = None
                   ) -> SyntheticAdditive:
    """Random additive objective whose dependency graph is ``graph`` (ER-sampled by default)."""
    g = graph if graph is not None else sample_er_graph(spec)
    rng = np.random.default_rng([spec.seed, 0])
    comps = []
    for clique in max_cliques(g):
        k = len(clique)
        G = rng.standard_normal((k, k))
        A = G @ G.T / k + 0.5 * np.eye(k)
        comps.append(Component(clique.dims, A, rng.uniform(0.2, 0.8, k), float(rng.uniform(0.5, 1.0)),
                               rng.uniform(0.5, 1.5, k)))
    return SyntheticAdditive(spec.D, g, comps, noise, seed=spec.seed)
