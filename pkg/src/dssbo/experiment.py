"""Build problems from a config and run optimizers over seeds."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config import ExperimentConfig
from .envs.base import evaluate_policy, sample_states
from .envs.drone import DroneConfig, DroneWorld
from .envs.pursuit import PursuitConfig, PursuitWorld
from .envs.synthetic import make_synthetic
from .errors import PoisonedEntryError
from .gp import AcquisitionConfig, BetaMode, BetaSchedule
from .graph import ErdosRenyiSpec
from .hessian import FdConfig, SurrogateHessianConfig, fd_hessian, surrogate_policy_hessian
from .hom import HomLayout, HomPolicy, RelaxedHom
from .kernels import KernelSpec
from .optimize import (BoSettings, RunTrace, run_dss_gp_ucb, run_gp_ucb, run_random_search,
                       write_trace)
from .structure import StructureSearchConfig

log = logging.getLogger(__name__)


@dataclass
class Problem:
    D: int
    objective: Callable
    hessian: Callable
    true_value: Optional[Callable] = None
    optimum: Optional[float] = None
    layout: Optional[HomLayout] = None
    truth: object = None


def make_env(cfg: ExperimentConfig):
    if cfg.env == "drone":
        d = cfg.get("drone")
        return DroneWorld(DroneConfig(n_drones=d["n_drones"], n_points=d["n_points"], epoch_len=d["epoch_len"]))
    if cfg.env in ("pursuit", "pursuit_het"):
        p = cfg.get("pursuit")
        return PursuitWorld(PursuitConfig(n_predators=p["n_predators"], epoch_len=p["epoch_len"],
                                          heterogeneous=cfg.env == "pursuit_het"))
    raise ValueError(f"{cfg.env} is not a multi-agent environment")


def policy_layout(cfg: ExperimentConfig, env) -> HomLayout:
    p = cfg.get("policy")
    return HomLayout(env.n_agents, env.state_dim, env.action_dim, p["hidden_layers"], p["hidden_width"],
                     p["weight_range"])


def surrogate_config(cfg: ExperimentConfig) -> SurrogateHessianConfig:
    s = cfg.get("structure")
    return SurrogateHessianConfig(n_states=s["n_states"], aggregate=s["aggregate"], fd=FdConfig(step=s["fd_step"]))


def build_problem(cfg: ExperimentConfig, seed: int) -> Problem:
    hrng = np.random.default_rng([seed, 2])
    if cfg.env == "synthetic":
        s = cfg.get("synthetic")
        obj = make_synthetic(ErdosRenyiSpec(s["dim"], s["p_g"], seed), noise=s["noise"])
        sigma = s["hessian_noise"]
        if s["hessian"] == "analytic":
            hess = obj.noisy_hessian(sigma, hrng)
        else:
            step = cfg["structure.fd_step"]
            iu = np.triu_indices(obj.D)

            def hess(theta):
                H = fd_hessian(obj.value, theta, FdConfig(step=step))
                noise = np.zeros_like(H)
                noise[iu] = sigma * hrng.standard_normal(len(iu[0]))
                return H + noise + np.triu(noise, 1).T
        return Problem(obj.D, obj, hess, obj.value, obj.maximum, truth=obj)

    env = make_env(cfg)
    layout = policy_layout(cfg, env)
    tau, self_edges = cfg["policy.tau"], cfg["policy.self_edges"]
    repeats = cfg.eval_repeats
    scfg = surrogate_config(cfg)
    relaxed = RelaxedHom.from_config(layout, scfg, tau, self_edges)
    eval_seed = 1000 * seed

    def objective(theta):
        return evaluate_policy(env, HomPolicy(layout, theta, tau, self_edges), eval_seed, repeats)

    def hess(theta):
        states = sample_states(env, scfg.n_states, int(hrng.integers(2**31)))
        return surrogate_policy_hessian(theta, relaxed, states, scfg)

    return Problem(layout.size, objective, hess, layout=layout)


def bo_settings(cfg: ExperimentConfig, offset: int = 0) -> BoSettings:
    k, b, a = cfg.get("kernel"), cfg.get("beta"), cfg.get("acquisition")
    return BoSettings(
        base=KernelSpec(k["family"], k["lengthscale"], k["variance"]),
        beta=BetaSchedule(BetaMode(b["mode"]), b["delta"], b["a"], b["b"], b["r"], offset),
        acquisition=AcquisitionConfig(a["n_random"], a["n_keep"], a["n_rounds"]),
        noise_var=k["noise_var"], batch_size=cfg.batch_size, refit_every=k["refit_every"],
    )


def structure_config(cfg: ExperimentConfig) -> StructureSearchConfig:
    s = cfg.get("structure")
    return StructureSearchConfig(T0=s["T0"], C1=s["C1"], c_h=s["c_h"], edge_cap=s["edge_cap"],
                                 delta1=s["delta1"], sigma_n=s["sigma_n"])


def run_seed(cfg: ExperimentConfig, seed: int, problem: Optional[Problem] = None) -> RunTrace:
    prob = problem or build_problem(cfg, seed)
    rng = np.random.default_rng([seed, 1])
    T = cfg.T
    if cfg.optimizer == "random":
        return run_random_search(prob.objective, prob.D, T, rng, prob.true_value, prob.optimum, seed=seed)
    if cfg.optimizer == "gp_ucb":
        return run_gp_ucb(prob.objective, prob.D, T, rng, bo_settings(cfg), None, prob.true_value,
                          prob.optimum, seed=seed)
    scfg = structure_config(cfg)
    T0, C1 = scfg.resolve(prob.D)
    return run_dss_gp_ucb(prob.objective, prob.hessian, prob.D, scfg, T, rng, bo_settings(cfg, T0 * C1),
                          prob.true_value, prob.optimum, seed=seed)


@dataclass
class RunArtifacts:
    out_dir: Path
    traces: list = field(default_factory=list)
    files: list = field(default_factory=list)
    ok: bool = True


def run_experiment(cfg: ExperimentConfig, out_dir) -> RunArtifacts:
    """Run every seed, write per-seed traces and the rendered summary.

    A seed whose objective or Hessian oracle fails keeps its partial trace and
    marks the artifacts as not ok; later seeds still run.
    """
    from .render import render_outputs

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_ini())
    art = RunArtifacts(out)
    for seed in cfg.seeds:
        log.info("seed %d: %s on %s, T=%d", seed, cfg.optimizer, cfg.env, cfg.T)
        try:
            trace = run_seed(cfg, seed)
        except (PoisonedEntryError, ArithmeticError) as exc:
            trace = RunTrace(D=0, optimizer=cfg.optimizer, seed=seed, status="aborted", error=str(exc))
        if trace.status != "ok":
            art.ok = False
            log.error("seed %d aborted: %s", seed, trace.error)
        write_trace(trace, out / f"seed_{seed}")
        art.traces.append(trace)
    art.files = render_outputs(art.traces, out)
    return art


def mean_final(traces, attr: str) -> float:
    vals = [getattr(t, attr)[-1] for t in traces if getattr(t, attr)]
    return float(np.mean(vals)) if vals else math.nan
