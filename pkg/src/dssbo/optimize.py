"""DSS-GP-UCB, plain GP-UCB and random search, with regret bookkeeping."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractViolation, ObjectiveError
from .gp import AcquisitionConfig, BetaSchedule, GpModel, select_lengthscale, ucb_acquire
from .graph import DependencyGraph, graph_from_cliques, max_cliques
from .kernels import AdditiveKernel, Clique, KernelSpec
from .structure import StructureSearchConfig, detect_edges, sample_hessians

log = logging.getLogger(__name__)

TRACE_FILE = "trace.tsv"
SIDECAR_FILE = "structure.json"
SUMS_FILE = "hessian_sums.npy"
TRACE_COLUMNS = ("phase", "iteration", "theta", "y", "best_so_far", "cum_regret")


@dataclass
class RunTrace:
    D: int
    optimizer: str = "dss_gp_ucb"
    seed: Optional[int] = None
    phase: list = field(default_factory=list)
    iteration: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    values: list = field(default_factory=list)
    best_so_far: list = field(default_factory=list)
    cum_regret: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    T0: int = 0
    C1: int = 0
    threshold: Optional[float] = None
    graph: Optional[DependencyGraph] = None
    cliques: Optional[list] = None
    hessian_sums: Optional[np.ndarray] = None
    hessian_queries: int = 0
    optimum: Optional[float] = None
    status: str = "ok"
    error: str = ""
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self._best = -math.inf
        self._regret = 0.0

    def record(self, phase: str, it: int, theta, y: float, true_value: Optional[float],
               weight: int = 1) -> None:
        self.phase.append(phase)
        self.iteration.append(int(it))
        self.thetas.append(np.asarray(theta, dtype=float).copy())
        self.values.append(float(y))
        if not math.isnan(y):
            self._best = max(self._best, float(y))
        self.best_so_far.append(self._best if self._best > -math.inf else math.nan)
        if self.optimum is not None and true_value is not None:
            self._regret += weight * (self.optimum - true_value)
            self.cum_regret.append(self._regret)
        else:
            self.cum_regret.append(math.nan)
        self.weights.append(int(weight))

    @property
    def n_objective_queries(self) -> int:
        return sum(1 for p in self.phase if p != "hessian")

    def final_regret(self) -> float:
        return self.cum_regret[-1] if self.cum_regret else math.nan

    def best_value(self) -> float:
        finite = [v for v in self.values if not math.isnan(v)]
        return max(finite) if finite else math.nan

    def objective_rows(self):
        return [i for i, p in enumerate(self.phase) if p != "hessian"]


# --- serialisation ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_trace(trace: RunTrace, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(TRACE_COLUMNS)]
    for i in range(len(trace.phase)):
        lines.append("\t".join([
            trace.phase[i], str(trace.iteration[i]),
            ",".join(repr(float(v)) for v in trace.thetas[i]),
            _fmt(trace.values[i]), _fmt(trace.best_so_far[i]), _fmt(trace.cum_regret[i]),
        ]))
    (out / TRACE_FILE).write_text("\n".join(lines) + "\n")
    side = {
        "D": trace.D, "optimizer": trace.optimizer, "seed": trace.seed,
        "T0": trace.T0, "C1": trace.C1, "threshold": trace.threshold,
        "hessian_queries": trace.hessian_queries, "optimum": trace.optimum,
        "status": trace.status, "error": trace.error, "flags": trace.flags,
        "edges": [list(e) for e in trace.graph.edge_list()] if trace.graph is not None else None,
        "cliques": [list(c) for c in trace.cliques] if trace.cliques is not None else None,
    }
    (out / SIDECAR_FILE).write_text(json.dumps(side, indent=1) + "\n")
    if trace.hessian_sums is not None:
        np.save(out / SUMS_FILE, trace.hessian_sums)
    return out


def _parse(s: str) -> float:
    return math.nan if s == "" else float(s)


def read_trace(directory) -> RunTrace:
    d = Path(directory)
    side = json.loads((d / SIDECAR_FILE).read_text())
    tr = RunTrace(D=side["D"], optimizer=side["optimizer"], seed=side["seed"])
    tr.T0, tr.C1, tr.threshold = side["T0"], side["C1"], side["threshold"]
    tr.hessian_queries, tr.optimum = side["hessian_queries"], side["optimum"]
    tr.status, tr.error, tr.flags = side["status"], side["error"], side.get("flags", [])
    if side["edges"] is not None:
        tr.graph = DependencyGraph(tr.D, [tuple(e) for e in side["edges"]])
    if side["cliques"] is not None:
        tr.cliques = [Clique(tuple(c)) for c in side["cliques"]]
    rows = (d / TRACE_FILE).read_text().splitlines()
    if rows[0].split("\t") != list(TRACE_COLUMNS):
        raise ContractViolation(f"unexpected trace header in {d / TRACE_FILE}")
    for row in rows[1:]:
        phase, it, theta, y, best, reg = row.split("\t")
        tr.phase.append(phase)
        tr.iteration.append(int(it))
        tr.thetas.append(np.array([float(v) for v in theta.split(",")]))
        tr.values.append(_parse(y))
        tr.best_so_far.append(_parse(best))
        tr.cum_regret.append(_parse(reg))
        tr.weights.append(tr.C1 if phase == "hessian" else 1)
    if (d / SUMS_FILE).exists():
        tr.hessian_sums = np.load(d / SUMS_FILE)
    return tr


# --- GP-UCB phase ------------------------------------------------------------------

@dataclass(frozen=True)
class BoSettings:
    """Knobs shared by every GP-UCB run."""

    base: KernelSpec = KernelSpec()
    beta: BetaSchedule = BetaSchedule()
    acquisition: AcquisitionConfig = AcquisitionConfig()
    noise_var: float = 1e-3
    batch_size: int = 1
    normalize_y: bool = True
    normalize_kernel: bool = True
    refit_every: int = 0
    lengthscale_grid: tuple = (0.1, 0.2, 0.4, 0.8)
    dedup_tol: float = 1e-6

    def kernel_for(self, cliques: Sequence, D: int) -> AdditiveKernel:
        base = self.base
        if self.normalize_kernel and len(cliques) > 1:
            base = base.replace(variance=base.variance / len(cliques))
        return AdditiveKernel(cliques, base, D)


def _standardise(y: np.ndarray) -> np.ndarray:
    if len(y) == 0:
        return y
    sd = float(np.std(y))
    return (y - float(np.mean(y))) / (sd if sd > 1e-12 else 1.0)


def _evaluate(objective, theta, trace, true_value):
    y = float(objective(theta))
    if not math.isfinite(y):
        raise ObjectiveError(f"objective returned {y!r}")
    tv = float(true_value(theta)) if true_value is not None else None
    return y, tv


def gp_ucb_phase(objective: Callable, kernel: AdditiveKernel, trace: RunTrace, start: int, T: int,
                 rng: np.random.Generator, settings: BoSettings,
                 true_value: Optional[Callable] = None, phase: str = "bo") -> RunTrace:
    """GP-UCB iterations ``start+1 .. T`` appended to ``trace``.

    Each round selects ``batch_size`` points; later points in a round see the
    earlier ones as if they had returned their posterior mean (constant liar).
    """
    D = kernel.dim
    X = np.zeros((0, D))
    y = np.zeros(0)
    it = start
    while it < T:
        if settings.refit_every and len(y) >= 2 and (it - start) % settings.refit_every == 0:
            kernel = select_lengthscale(kernel, X, _standardise(y) if settings.normalize_y else y,
                                        settings.noise_var, settings.lengthscale_grid)
        yt = _standardise(y) if settings.normalize_y else y
        model = GpModel.fit(kernel, X, yt, settings.noise_var, dim=D)
        b = min(settings.batch_size, T - it)
        batch = []
        for j in range(b):
            beta = settings.beta(len(y) + j + 1, D)
            theta = None
            for attempt in range(3):
                cand = ucb_acquire(model, beta, settings.acquisition, rng.integers(2**63))
                if all(np.max(np.abs(cand - p)) > settings.dedup_tol for p in batch):
                    theta = cand
                    break
            if theta is None:
                theta = rng.uniform(size=D)
                trace.flags.append(f"iteration {it + j + 1}: duplicate batch point replaced by random draw")
            batch.append(theta)
            if j + 1 < b:
                mu, _ = model.posterior(theta)
                model = model.condition(theta, mu)
        for theta in batch:
            it += 1
            try:
                val, tv = _evaluate(objective, theta, trace, true_value)
            except ObjectiveError as exc:
                trace.status, trace.error = "aborted", f"iteration {it}: {exc}"
                log.error("run aborted at iteration %d: %s", it, exc)
                return trace
            trace.record(phase, it, theta, val, tv)
            X = np.vstack([X, theta])
            y = np.append(y, val)
    return trace


def run_gp_ucb(objective: Callable, D: int, T: int, rng, settings: BoSettings = BoSettings(),
               cliques: Optional[Sequence] = None, true_value: Optional[Callable] = None,
               optimum: Optional[float] = None, name: str = "gp_ucb", seed=None) -> RunTrace:
    """GP-UCB with a fixed kernel; the full D-dimensional kernel unless cliques are given."""
    if T < 1:
        raise ContractViolation("T must be positive")
    rng = np.random.default_rng(rng)
    cl = list(cliques) if cliques is not None else [Clique(tuple(range(D)))]
    trace = RunTrace(D=D, optimizer=name, seed=seed, optimum=optimum)
    trace.cliques = [c if isinstance(c, Clique) else Clique(tuple(c)) for c in cl]
    trace.graph = graph_from_cliques(D, trace.cliques)
    return gp_ucb_phase(objective, settings.kernel_for(trace.cliques, D), trace, 0, T, rng,
                        settings, true_value)


def run_dss_gp_ucb(objective: Callable, hessian: Optional[Callable], D: int,
                   cfg: StructureSearchConfig, T: int, rng, settings: BoSettings = BoSettings(),
                   true_value: Optional[Callable] = None, optimum: Optional[float] = None,
                   cliques: Optional[Sequence] = None, seed=None) -> RunTrace:
    """Two-phase run: learn the clique structure from Hessians, then GP-UCB on it.

    When ``cliques`` is supplied the structure phase is skipped and the run is
    identical to :func:`run_gp_ucb` with that decomposition.
    """
    if cliques is not None:
        return run_gp_ucb(objective, D, T, rng, settings, cliques, true_value, optimum,
                          name="dss_gp_ucb", seed=seed)
    if hessian is None:
        raise ContractViolation("a Hessian oracle is required when no decomposition is given")
    rng = np.random.default_rng(rng)
    T0, C1 = cfg.resolve(D)
    if T <= T0:
        raise ContractViolation(f"T={T} must exceed T0={T0}")
    trace = RunTrace(D=D, optimizer="dss_gp_ucb", seed=seed, optimum=optimum)
    trace.T0, trace.C1 = T0, C1
    acc = sample_hessians(hessian, D, cfg, rng)
    for t, site in enumerate(acc.sites, start=1):
        tv = float(true_value(site)) if true_value is not None else None
        trace.record("hessian", t, site, math.nan, tv, weight=C1)
    graph, c_h = detect_edges(acc, cfg, return_threshold=True)
    trace.graph, trace.threshold = graph, c_h
    trace.hessian_sums, trace.hessian_queries = acc.sums.copy(), acc.query_count
    trace.cliques = max_cliques(graph)
    log.info("structure: %d edges, %d cliques (largest %d), c_h=%.4g", len(graph),
             len(trace.cliques), max(len(c) for c in trace.cliques), c_h)
    kernel = settings.kernel_for(trace.cliques, D)
    return gp_ucb_phase(objective, kernel, trace, T0, T, rng, settings, true_value)


def run_random_search(objective: Callable, D: int, T: int, rng,
                      true_value: Optional[Callable] = None, optimum: Optional[float] = None,
                      seed=None) -> RunTrace:
    rng = np.random.default_rng(rng)
    trace = RunTrace(D=D, optimizer="random", seed=seed, optimum=optimum)
    for it in range(1, T + 1):
        theta = rng.uniform(size=D)
        try:
            val, tv = _evaluate(objective, theta, trace, true_value)
        except ObjectiveError as exc:
            trace.status, trace.error = "aborted", f"iteration {it}: {exc}"
            return trace
        trace.record("random", it, theta, val, tv)
    return trace
