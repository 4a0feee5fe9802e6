"""Dependency graphs over parameter dimensions and their maximal cliques."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ContractViolation
from .kernels import Clique


@dataclass(frozen=True)
class DependencyGraph:
    D: int
    edges: frozenset

    def __init__(self, D: int, edges: Iterable = ()):
        norm = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ContractViolation(f"self-loop on dimension {a}")
            if a > b:
                a, b = b, a
            if a < 0 or b >= D:
                raise ContractViolation(f"edge ({a}, {b}) out of range for D={D}")
            norm.add((a, b))
        object.__setattr__(self, "D", int(D))
        object.__setattr__(self, "edges", frozenset(norm))

    def __len__(self):
        return len(self.edges)

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.D, self.D), dtype=bool)
        for a, b in self.edges:
            A[a, b] = A[b, a] = True
        return A

    def neighbour_masks(self) -> list[int]:
        masks = [0] * self.D
        for a, b in self.edges:
            masks[a] |= 1 << b
            masks[b] |= 1 << a
        return masks

    def components(self) -> list[list[int]]:
        masks = self.neighbour_masks()
        seen, comps = 0, []
        for v in range(self.D):
            if seen >> v & 1:
                continue
            comp, frontier = 0, 1 << v
            while frontier:
                comp |= frontier
                nxt = 0
                for u in _bits(frontier):
                    nxt |= masks[u]
                frontier = nxt & ~comp
            seen |= comp
            comps.append(list(_bits(comp)))
        return comps

    def to_dict(self) -> dict:
        return {"D": self.D, "edges": [list(e) for e in self.edge_list()]}

    @classmethod
    def from_dict(cls, data: dict) -> "DependencyGraph":
        return cls(int(data["D"]), [tuple(e) for e in data["edges"]])


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def max_cliques(g: DependencyGraph) -> list[Clique]:
    """All maximal cliques, Bron-Kerbosch with Tomita pivoting on bitsets.

    Isolated vertices come back as singleton cliques. Output is sorted.
    """
    adj = g.neighbour_masks()
    found: list[tuple[int, ...]] = []

    def expand(r: list[int], p: int, x: int) -> None:
        if not p and not x:
            found.append(tuple(sorted(r)))
            return
        pivot, most = -1, -1
        for u in _bits(p | x):
            cnt = bin(p & adj[u]).count("1")
            if cnt > most:
                pivot, most = u, cnt
        for v in list(_bits(p & ~adj[pivot])):
            expand(r + [v], p & adj[v], x & adj[v])
            p &= ~(1 << v)
            x |= 1 << v

    expand([], (1 << g.D) - 1, 0)
    return [Clique(c) for c in sorted(found)]


@dataclass(frozen=True)
class ErdosRenyiSpec:
    D: int
    p_g: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p_g < 1:
            raise ContractViolation("p_g must lie in (0, 1)")
        if self.D < 1:
            raise ContractViolation("D must be positive")


def sample_er_graph(spec: ErdosRenyiSpec) -> DependencyGraph:
    rng = np.random.default_rng(spec.seed)
    u = rng.uniform(size=(spec.D, spec.D))
    a, b = np.nonzero(np.triu(u < spec.p_g, k=1))
    return DependencyGraph(spec.D, zip(a.tolist(), b.tolist()))


def graph_from_cliques(D: int, cliques: Iterable) -> DependencyGraph:
    edges = []
    for c in cliques:
        dims = list(c)
        edges += [(dims[i], dims[j]) for i in range(len(dims)) for j in range(i + 1, len(dims))]
    return DependencyGraph(D, edges)
