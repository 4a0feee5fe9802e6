"""Exact GP regression, the GP-UCB acquisition and its exploration schedule."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ContractViolation
from .kernels import AdditiveKernel, KernelSpec

JITTER = 1e-6
REFINE_STEPS = 3


def as_additive(kernel, dim: int) -> AdditiveKernel:
    if isinstance(kernel, AdditiveKernel):
        return kernel
    if isinstance(kernel, KernelSpec):
        return AdditiveKernel.full(dim, kernel)
    raise ContractViolation(f"unsupported kernel object {type(kernel).__name__}")


@dataclass(frozen=True, eq=False)
class GpModel:
    """Fitted GP posterior. Immutable; ``fit``/``condition`` return new models."""

    kernel: AdditiveKernel
    inputs: np.ndarray
    observations: np.ndarray
    noise_var: float
    jitter: float
    chol: np.ndarray
    alpha: np.ndarray

    @classmethod
    def fit(cls, kernel, inputs, observations, noise_var: float = 0.0,
            jitter: float = JITTER, dim: int | None = None) -> "GpModel":
        X = np.asarray(inputs, dtype=float)
        y = np.asarray(observations, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(len(y), -1) if len(y) else X.reshape(0, dim or 0)
        if dim is None:
            dim = kernel.dim if isinstance(kernel, AdditiveKernel) else X.shape[1]
        X = X.reshape(-1, dim)
        if X.shape[0] != y.shape[0]:
            raise ContractViolation(f"{X.shape[0]} inputs but {y.shape[0]} observations")
        if noise_var < 0:
            raise ContractViolation("noise variance must be non-negative")
        kern = as_additive(kernel, dim)
        if X.shape[0] == 0:
            empty = np.zeros((0, 0))
            return cls(kern, X, y, float(noise_var), float(jitter), empty, np.zeros(0))
        K = kern.gram(X)
        K[np.diag_indices_from(K)] += noise_var
        L = np.linalg.cholesky(K + jitter * np.eye(len(y)))
        alpha = cho_solve((L, True), y)
        # the jitter only stabilises the factorisation; refining against the
        # unjittered system removes its bias from the mean. Each step shrinks
        # the residual by jitter / (eigenvalue + jitter), so it never grows.
        for _ in range(REFINE_STEPS):
            r = y - K @ alpha
            if np.max(np.abs(r)) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
                break
            alpha = alpha + cho_solve((L, True), r)
        return cls(kern, X, y, float(noise_var), float(jitter), L, alpha)

    @property
    def n_obs(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def condition(self, theta, y) -> "GpModel":
        X = np.vstack([self.inputs, np.asarray(theta, dtype=float).reshape(1, -1)])
        return GpModel.fit(self.kernel, X, np.append(self.observations, y),
                           self.noise_var, self.jitter, self.dim)

    def posterior(self, theta) -> tuple[float, float]:
        mean, var = self.posterior_batch(np.asarray(theta, dtype=float).reshape(1, -1))
        return float(mean[0]), float(var[0])

    def posterior_batch(self, thetas) -> tuple[np.ndarray, np.ndarray]:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        kxx = np.full(thetas.shape[0], self.kernel.prior_variance())
        if self.n_obs == 0:
            return np.zeros(thetas.shape[0]), kxx
        return self.posterior_from_cross(self.kernel.cross(thetas, self.inputs), kxx)

    def posterior_from_cross(self, kx: np.ndarray, kxx: np.ndarray):
        """Posterior moments given precomputed cross-covariances ``kx`` (n x T)."""
        if self.n_obs == 0:
            return np.zeros(kx.shape[0]), np.asarray(kxx, dtype=float).copy()
        mean = kx @ self.alpha
        v = solve_triangular(self.chol, kx.T, lower=True, check_finite=False)
        var = kxx - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)

    def log_marginal_likelihood(self) -> float:
        if self.n_obs == 0:
            return 0.0
        return float(-0.5 * self.observations @ self.alpha
                     - np.sum(np.log(np.diag(self.chol)))
                     - 0.5 * self.n_obs * math.log(2 * math.pi))


def select_lengthscale(kernel: AdditiveKernel, X, y, noise_var: float,
                       grid=(0.1, 0.2, 0.4, 0.8)) -> AdditiveKernel:
    """Pick the grid lengthscale with the highest log marginal likelihood."""
    best, best_lml = kernel, -np.inf
    for ls in grid:
        cand = kernel.with_base(kernel.base.replace(lengthscale=ls))
        try:
            lml = GpModel.fit(cand, X, y, noise_var).log_marginal_likelihood()
        except np.linalg.LinAlgError:
            continue
        if lml > best_lml:
            best, best_lml = cand, lml
    return best


# --- exploration schedule ------------------------------------------------------

class BetaMode(enum.Enum):
    PRACTICAL = "practical"
    THEORETICAL = "theoretical"


@dataclass(frozen=True)
class BetaSchedule:
    mode: BetaMode = BetaMode.PRACTICAL
    delta: float = 0.1
    a: float = 1.0
    b: float = 1.0
    r: float = 1.0
    offset: int = 0  # T0*C1 for the theoretical schedule

    def __post_init__(self):
        object.__setattr__(self, "mode", BetaMode(self.mode))
        if not 0 < self.delta <= 1:
            raise ContractViolation("delta must lie in (0, 1]")
        if min(self.a, self.b, self.r) <= 0:
            raise ContractViolation("a, b, r must be positive")

    def __call__(self, t: int, dim: int) -> float:
        return beta_value(self, t, dim)


def beta_value(s: BetaSchedule, t: int, dim: int) -> float:
    if t < 1:
        raise ContractViolation("beta is defined for t >= 1")
    if s.mode is BetaMode.PRACTICAL:
        return 2.0 * math.log(dim * t * t * math.pi**2 / (6.0 * s.delta))
    tt = max(t - s.offset, 1)
    first = 2.0 * math.log(tt * tt * 2.0 * math.pi**2 / (3.0 * s.delta**2))
    inner = math.sqrt(math.log(4.0 * dim * s.a / s.delta))
    second = 2.0 * dim * math.log(tt * tt * dim * s.b * s.r * inner)
    return first + second


# --- acquisition ----------------------------------------------------------------

@dataclass(frozen=True)
class AcquisitionConfig:
    n_random: int = 256
    n_keep: int = 8
    n_rounds: int = 50
    grid_points: int = 9
    golden_steps: int = 6


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class _Probe:
    """Acquisition evaluations for a set of starts with cached cross-covariances.

    Moving one coordinate only changes the cliques that contain it, so a line
    probe recomputes just those terms of k(x, X).
    """

    def __init__(self, model: GpModel, beta: float, starts: np.ndarray):
        self.model = model
        self.kernel = model.kernel
        self.sqrt_beta = math.sqrt(beta)
        self.kxx = self.kernel.prior_variance()
        self.x = starts.copy()
        self.kx = self._cross(self.x, None)

    def _cross(self, pts, subset):
        if self.model.n_obs == 0:
            return np.zeros((pts.shape[0], 0))
        return self.kernel.cross(pts, self.model.inputs, subset)

    def score(self, kx):
        mean, var = self.model.posterior_from_cross(kx, np.full(kx.shape[0], self.kxx))
        return mean + self.sqrt_beta * np.sqrt(var)

    def line(self, coord: int, values: np.ndarray):
        """Acquisition of every start with ``coord`` replaced by each of ``values``.

        values has shape (n_starts, n_values); returns scores of the same shape
        and the matching cross-covariance rows.
        """
        n, m = values.shape
        sub = self.kernel.cliques_containing(coord)
        pts = np.repeat(self.x, m, axis=0)
        pts[:, coord] = values.reshape(-1)
        if self.model.n_obs == 0:
            kx = np.zeros((n * m, 0))
        else:
            old = self._cross(self.x, sub)
            new = self._cross(pts, sub)
            kx = np.repeat(self.kx - old, m, axis=0) + new
        return self.score(kx).reshape(n, m), kx.reshape(n, m, -1)


def ucb_acquire(model: GpModel, beta: float, config: AcquisitionConfig | None = None,
                rng: np.random.Generator | int | None = 0, return_value: bool = False):
    """Maximise mean + sqrt(beta) * std over random starts plus coordinate sweeps."""
    if beta < 0:
        raise ContractViolation("beta must be non-negative")
    cfg = config or AcquisitionConfig()
    rng = np.random.default_rng(rng)
    D = model.dim
    cand = rng.uniform(size=(cfg.n_random, D))
    n_cand = cand.shape[0]
    kx = model.kernel.cross(cand, model.inputs) if model.n_obs else np.zeros((n_cand, 0))
    mean, var = model.posterior_from_cross(kx, np.full(n_cand, model.kernel.prior_variance()))
    scores = mean + math.sqrt(beta) * np.sqrt(var)
    # stable ordering: higher score first, then lower candidate index
    order = np.lexsort((np.arange(n_cand), -scores))
    keep = order[: cfg.n_keep]
    best_x, best_val = cand[order[0]].copy(), float(scores[order[0]])

    probe = _Probe(model, beta, cand[keep])
    probe.kx = kx[keep].copy()
    cur = scores[keep].copy()
    coords = np.concatenate([rng.permutation(D) for _ in range(cfg.n_rounds // max(D, 1) + 1)])
    grid = np.linspace(0.0, 1.0, cfg.grid_points)
    n = len(keep)
    for rnd in range(cfg.n_rounds):
        c = int(coords[rnd])
        vals = np.broadcast_to(grid, (n, grid.size)).copy()
        s, k = probe.line(c, vals)
        arg = np.argmax(s, axis=1)
        centre = grid[arg]
        cand_val, cand_s, cand_k = centre.copy(), s[np.arange(n), arg], k[np.arange(n), arg]
        step = 1.0 / (cfg.grid_points - 1)
        lo, hi = np.clip(centre - step, 0, 1), np.clip(centre + step, 0, 1)
        for _ in range(cfg.golden_steps):
            x1 = hi - _INV_PHI * (hi - lo)
            x2 = lo + _INV_PHI * (hi - lo)
            s2, k2 = probe.line(c, np.stack([x1, x2], axis=1))
            left = s2[:, 0] >= s2[:, 1]
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            for col, xs in ((0, x1), (1, x2)):
                better = s2[:, col] > cand_s
                cand_val = np.where(better, xs, cand_val)
                cand_s = np.where(better, s2[:, col], cand_s)
                cand_k[better] = k2[better, col]
        improve = cand_s > cur
        if np.any(improve):
            probe.x[improve, c] = cand_val[improve]
            probe.kx[improve] = cand_k[improve]
            cur[improve] = cand_s[improve]
        top = int(np.argmax(cur))
        if cur[top] > best_val:
            best_val, best_x = float(cur[top]), probe.x[top].copy()
    if return_value:
        return best_x, best_val
    return best_x


def ucb_value(model: GpModel, beta: float, thetas) -> np.ndarray:
    mean, var = model.posterior_batch(thetas)
    return mean + math.sqrt(beta) * np.sqrt(var)
