"""Stationary base kernels, clique-sum (additive) kernels and their
fourth-order mixed derivatives.

All inputs live in the unit cube. Distances are divided by the
lengthscale before the radial profile is applied:

    RBF       k(d) = s * exp(-d**2 / 2)
    Matern52  k(d) = s * (1 + sqrt(5) d + 5/3 d**2) exp(-sqrt(5) d)
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _accel
from ._accel import njit
from .errors import ContractViolation, SingularInputError

SQRT5 = math.sqrt(5.0)


class Family(enum.IntEnum):
    RBF = 0
    MATERN52 = 1

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        table = {"rbf": cls.RBF, "se": cls.RBF, "matern52": cls.MATERN52, "matern": cls.MATERN52}
        if key not in table:
            raise ContractViolation(f"unknown kernel family {name!r}")
        return table[key]


@dataclass(frozen=True)
class KernelSpec:
    family: Family = Family.MATERN52
    lengthscale: float = 0.2
    variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if not self.lengthscale > 0:
            raise ContractViolation("lengthscale must be positive")
        if not 0 < self.variance <= 1:
            raise ContractViolation("variance must lie in (0, 1]")

    def replace(self, **changes) -> "KernelSpec":
        fields = {"family": self.family, "lengthscale": self.lengthscale, "variance": self.variance}
        fields.update(changes)
        return KernelSpec(**fields)


@dataclass(frozen=True)
class Clique:
    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ContractViolation("a clique needs at least one dimension")
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise ContractViolation(f"clique dims must be strictly increasing: {dims}")
        if dims[0] < 0:
            raise ContractViolation(f"negative clique index in {dims}")
        object.__setattr__(self, "dims", dims)

    def __len__(self):
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)


def _profile(d: np.ndarray | float, family: Family):
    if family == Family.RBF:
        return np.exp(-0.5 * np.square(d))
    sd = SQRT5 * d
    return (1.0 + sd + sd * sd / 3.0) * np.exp(-sd)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractViolation(f"kernel_eval needs equal-length vectors, got {x.shape} and {y.shape}")
    d = math.sqrt(float(np.sum((x - y) ** 2))) / spec.lengthscale
    return float(spec.variance * _profile(d, spec.family))


class AdditiveKernel:
    """Sum of one base kernel applied to each clique's coordinates.

    The clique lists are stored padded (``index``/``sizes``) so the compiled
    cross-covariance loop can walk them without Python objects.
    """

    def __init__(self, cliques: Iterable, base: KernelSpec | None = None, dim: int | None = None):
        self.cliques = tuple(c if isinstance(c, Clique) else Clique(tuple(sorted(c))) for c in cliques)
        if not self.cliques:
            raise ContractViolation("an additive kernel needs at least one clique")
        self.base = base if base is not None else KernelSpec()
        top = max(c.dims[-1] for c in self.cliques)
        self.dim = top + 1 if dim is None else int(dim)
        if top >= self.dim:
            raise ContractViolation(f"clique index {top} out of range for D={self.dim}")
        width = max(len(c) for c in self.cliques)
        self.index = np.zeros((len(self.cliques), width), dtype=np.int64)
        self.sizes = np.zeros(len(self.cliques), dtype=np.int64)
        for r, c in enumerate(self.cliques):
            self.index[r, : len(c)] = c.dims
            self.sizes[r] = len(c)
        members = [[] for _ in range(self.dim)]
        for r, c in enumerate(self.cliques):
            for d in c.dims:
                members[d].append(r)
        self._members = [np.asarray(m, dtype=np.int64) for m in members]

    @classmethod
    def full(cls, dim: int, base: KernelSpec | None = None) -> "AdditiveKernel":
        """Single clique over every dimension: the ordinary D-dimensional kernel."""
        return cls([Clique(tuple(range(dim)))], base, dim)

    @property
    def n_cliques(self) -> int:
        return len(self.cliques)

    def with_base(self, base: KernelSpec) -> "AdditiveKernel":
        return AdditiveKernel(self.cliques, base, self.dim)

    def cliques_containing(self, d: int) -> np.ndarray:
        return self._members[d]

    def prior_variance(self) -> float:
        return self.base.variance * self.n_cliques

    def __call__(self, theta, theta2) -> float:
        return additive_eval(self, theta, theta2)

    def cross(self, X, Y, subset: np.ndarray | None = None) -> np.ndarray:
        """Cross-covariance matrix between the rows of X and the rows of Y.

        ``subset`` restricts the sum to the listed clique rows.
        """
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
        Y = np.ascontiguousarray(np.atleast_2d(Y), dtype=float)
        if X.shape[1] != self.dim or Y.shape[1] != self.dim:
            raise ContractViolation(f"expected {self.dim} columns, got {X.shape[1]} and {Y.shape[1]}")
        index, sizes = self.index, self.sizes
        if subset is not None:
            index, sizes = index[subset], sizes[subset]
        return additive_cross(X, Y, index, sizes, int(self.base.family),
                              1.0 / self.base.lengthscale, self.base.variance)

    def gram(self, X) -> np.ndarray:
        G = self.cross(X, X)
        return 0.5 * (G + G.T)

    def describe(self) -> dict:
        return {
            "family": self.base.family.name,
            "lengthscale": self.base.lengthscale,
            "variance": self.base.variance,
            "cliques": [list(c.dims) for c in self.cliques],
        }


def additive_eval(k: AdditiveKernel, theta, theta2) -> float:
    theta = np.asarray(theta, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    if theta.shape != (k.dim,) or theta2.shape != (k.dim,):
        raise ContractViolation(f"expected vectors of length {k.dim}")
    total = 0.0
    for c in k.cliques:
        idx = list(c.dims)
        total += kernel_eval(k.base, theta[idx], theta2[idx])
    return total


# --- compiled cross-covariance -------------------------------------------------

@njit
def _additive_cross_nb(X, Y, index, sizes, family, inv_ls, variance):
    n = X.shape[0]
    m = Y.shape[0]
    out = np.zeros((n, m))
    s5 = math.sqrt(5.0)
    for a in range(n):
        for b in range(m):
            acc = 0.0
            for c in range(index.shape[0]):
                d2 = 0.0
                for q in range(sizes[c]):
                    k = index[c, q]
                    diff = X[a, k] - Y[b, k]
                    d2 += diff * diff
                if family == 0:
                    acc += math.exp(-0.5 * d2 * inv_ls * inv_ls)
                else:
                    sd = s5 * math.sqrt(d2) * inv_ls
                    acc += (1.0 + sd + sd * sd / 3.0) * math.exp(-sd)
            out[a, b] = variance * acc
    return out


def _additive_cross_np(X, Y, index, sizes, family, inv_ls, variance):
    out = np.zeros((X.shape[0], Y.shape[0]))
    for row, size in zip(index, sizes):
        cols = row[:size]
        diff = X[:, None, cols] - Y[None, :, cols]
        d = np.sqrt(np.einsum("abk,abk->ab", diff, diff)) * inv_ls
        out += _profile(d, Family(family))
    return variance * out


def additive_cross(X, Y, index, sizes, family, inv_ls, variance):
    if _accel.use_numba():
        return _additive_cross_nb(X, Y, index, sizes, family, inv_ls, variance)
    return _additive_cross_np(X, Y, index, sizes, family, inv_ls, variance)


# --- derivative kernels ----------------------------------------------------------

def derivative_kernel(spec: KernelSpec, i: int, j: int, theta, theta2) -> float:
    """Covariance of d2f/dtheta_i dtheta_j at theta and theta2.

    This is d4 k / (dtheta_i dtheta2_i dtheta_j dtheta2_j) for i != j, i.e. the
    kernel of the (i, j) Hessian entry of a sample path.
    """
    theta = np.asarray(theta, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    if theta.shape != theta2.shape or theta.ndim != 1:
        raise ContractViolation("derivative_kernel needs equal-length vectors")
    if i == j:
        raise ContractViolation("derivative_kernel is defined for i != j")
    ls = spec.lengthscale
    diff = (theta - theta2) / ls
    di, dj = diff[i], diff[j]
    r = math.sqrt(float(diff @ diff))
    scale = spec.variance / ls**4
    if spec.family == Family.RBF:
        return float(scale * math.exp(-0.5 * r * r) * (1.0 - di * di) * (1.0 - dj * dj))
    if r == 0.0:
        raise SingularInputError("Matern-5/2 derivative kernel is singular at zero distance")
    a, b = di * di, dj * dj
    bracket = 1.0 - SQRT5 * (a + b) / r + 5.0 * a * b / r**2 + SQRT5 * a * b / r**3
    return float(scale * math.exp(-SQRT5 * r) * 25.0 / 3.0 * bracket)


def clique_list(groups: Sequence[Sequence[int]]) -> list[Clique]:
    return [Clique(tuple(sorted(g))) for g in groups]
