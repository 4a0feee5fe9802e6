"""Learning the dependency graph from repeated noisy Hessian queries."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ContractViolation, PoisonedEntryError
from .graph import DependencyGraph

log = logging.getLogger(__name__)

AUTO = "auto"


class StructureMode(enum.Enum):
    PRACTICAL = "practical"
    THEORETICAL = "theoretical"


@dataclass(frozen=True)
class StructureSearchConfig:
    """Phase-one settings.

    ``T0``/``C1`` left as ``None`` resolve to ``max(8, 2D)`` in practical mode,
    or to the high-probability recovery bound in theoretical mode (which then
    needs ``p_h`` and ``sigma_h2``).
    """

    T0: Optional[int] = None
    C1: Optional[int] = None
    c_h: Union[float, str] = AUTO
    edge_cap: int = 1500
    delta1: float = 0.1
    delta2: float = 0.1
    sigma_n: Union[float, str] = AUTO
    mode: StructureMode = StructureMode.PRACTICAL
    p_h: Optional[float] = None
    sigma_h2: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", StructureMode(self.mode))
        for name in ("T0", "C1"):
            v = getattr(self, name)
            if v is not None and int(v) < 1:
                raise ContractViolation(f"{name} must be >= 1")
        if self.edge_cap < 1:
            raise ContractViolation("edge_cap must be >= 1")
        for name in ("delta1", "delta2"):
            if not 0 < getattr(self, name) < 1:
                raise ContractViolation(f"{name} must lie in (0, 1)")
        if self.c_h != AUTO and float(self.c_h) < 0:
            raise ContractViolation("c_h must be non-negative")
        if self.sigma_n != AUTO and float(self.sigma_n) < 0:
            raise ContractViolation("sigma_n must be non-negative")

    def resolve(self, D: int) -> tuple[int, int]:
        """Concrete (T0, C1) for a problem of dimension D."""
        if self.mode is StructureMode.THEORETICAL and (self.T0 is None or self.C1 is None):
            n = theoretical_sample_count(D, self.delta1, self.delta2, self.p_h, self.sigma_h2,
                                         self._sigma_for_bound())
            return (self.T0 or n, self.C1 or n)
        default = max(8, 2 * D)
        return (int(self.T0) if self.T0 is not None else default,
                int(self.C1) if self.C1 is not None else default)

    def _sigma_for_bound(self) -> float:
        if self.sigma_n == AUTO:
            raise ContractViolation("theoretical mode needs an explicit sigma_n")
        return float(self.sigma_n)


def theoretical_sample_count(D, delta1, delta2, p_h, sigma_h2, sigma_n) -> int:
    """Smallest integer T0 = C1 above the exact-recovery bound."""
    if p_h is None or sigma_h2 is None:
        raise ContractViolation("theoretical mode requires p_h and sigma_h2")
    if not 0 < p_h <= 1 or sigma_h2 <= 0:
        raise ContractViolation("p_h must lie in (0, 1] and sigma_h2 must be positive")
    bound = (16 * D**2 / (p_h * delta1**2) * math.log(2 * D**2 / delta1)
             * sigma_n**2 / sigma_h2 + D**2 / (2 * delta2))
    return int(math.floor(bound)) + 1


@dataclass
class HessianAccumulator:
    D: int
    sums: np.ndarray
    query_count: int = 0
    sites: list = field(default_factory=list)
    repeats: int = 0
    site_sd: list = field(default_factory=list)

    @classmethod
    def empty(cls, D: int) -> "HessianAccumulator":
        return cls(D, np.zeros((D, D)))

    def add_site(self, theta: np.ndarray, samples: list[np.ndarray]) -> None:
        # fixed summation order keeps the result independent of how the
        # queries were scheduled
        stack = np.stack(samples)
        total = np.zeros((self.D, self.D))
        for h in stack:
            total += h
        self.sums += total
        self.query_count += len(samples)
        self.sites.append(np.asarray(theta, dtype=float).copy())
        self.repeats = len(samples)
        if len(samples) > 1:
            iu = np.triu_indices(self.D, k=1)
            var = stack[:, iu[0], iu[1]].var(axis=0, ddof=1)
            self.site_sd.append(float(math.sqrt(var.mean())) if var.size else 0.0)

    def sigma_hat(self) -> float:
        """Per-site pooled standard deviation of repeats, averaged over sites."""
        if not self.site_sd:
            return 0.0
        return float(np.mean(self.site_sd))


def _check_finite(h: np.ndarray) -> None:
    bad = np.argwhere(~np.isfinite(h))
    if bad.size:
        i, j = bad[0]
        raise PoisonedEntryError(i, j, h[i, j])


def sample_hessians(oracle: Callable[[np.ndarray], np.ndarray], D: int,
                    cfg: StructureSearchConfig, rng: np.random.Generator) -> HessianAccumulator:
    """Query the oracle C1 times at each of T0 uniform sites and sum the results."""
    T0, C1 = cfg.resolve(D)
    acc = HessianAccumulator.empty(D)
    for _ in range(T0):
        theta = rng.uniform(size=D)
        samples = []
        for _ in range(C1):
            h = np.asarray(oracle(theta), dtype=float)
            if h.shape != (D, D):
                raise ContractViolation(f"oracle returned shape {h.shape}, expected {(D, D)}")
            _check_finite(h)
            samples.append(h)
        acc.add_site(theta, samples)
    return acc


def resolve_threshold(acc: HessianAccumulator, cfg: StructureSearchConfig) -> float:
    if cfg.c_h != AUTO:
        return float(cfg.c_h)
    sigma = acc.sigma_hat() if cfg.sigma_n == AUTO else float(cfg.sigma_n)
    n_sites = max(len(acc.sites), 1)
    # standard deviation of a sum of T0*C1 independent noise terms; equals
    # T0*sigma when T0 == C1
    spread = math.sqrt(n_sites * max(acc.repeats, 1)) * sigma
    D = max(acc.D, 2)
    return spread * math.sqrt(2.0 * math.log(2.0 * D * D / cfg.delta1))


def detect_edges(acc: HessianAccumulator, cfg: StructureSearchConfig,
                 return_threshold: bool = False):
    """Edges whose summed off-diagonal Hessian magnitude strictly exceeds c_h."""
    c_h = resolve_threshold(acc, cfg)
    mag = np.abs(0.5 * (acc.sums + acc.sums.T))
    a, b = np.triu_indices(acc.D, k=1)
    vals = mag[a, b]
    hit = vals > c_h
    a, b, vals = a[hit], b[hit], vals[hit]
    if len(vals) > cfg.edge_cap:
        order = np.lexsort((b, a, -vals))[: cfg.edge_cap]
        a, b = a[order], b[order]
        log.info("edge cap %d reached; dropped %d weaker edges", cfg.edge_cap, int(hit.sum()) - cfg.edge_cap)
    g = DependencyGraph(acc.D, zip(a.tolist(), b.tolist()))
    return (g, c_h) if return_threshold else g
