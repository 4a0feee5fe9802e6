"""Hessian queries for structure search.

``fd_hessian`` differentiates any scalar function on the unit cube with a
4-point mixed stencil (one-sided next to the boundary).
``surrogate_policy_hessian`` applies it to a smoothed multi-agent policy:
soft role assignment through Sinkhorn normalisation and sigmoid edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import ContractViolation, PoisonedEntryError


@dataclass(frozen=True)
class FdConfig:
    step: float = 1e-3
    scheme: str = "central"
    chunk: int = 4096

    def __post_init__(self):
        if not 0 < self.step < 0.1:
            raise ContractViolation("FD step must lie in (0, 0.1)")
        if self.scheme != "central":
            raise ContractViolation(f"unsupported FD scheme {self.scheme!r}")
        if self.chunk < 1:
            raise ContractViolation("chunk must be positive")


@dataclass(frozen=True)
class SurrogateHessianConfig:
    n_states: int = 16
    sinkhorn_iters: int = 20
    sinkhorn_temperature: float = 0.1
    edge_sigmoid_sharpness: float = 10.0
    aggregate: str = "mean"
    fd: FdConfig = field(default_factory=FdConfig)

    def __post_init__(self):
        if self.n_states < 1:
            raise ContractViolation("n_states must be >= 1")
        if self.sinkhorn_iters < 0:
            raise ContractViolation("sinkhorn_iters must be >= 0")
        if not self.sinkhorn_temperature > 0 or not self.edge_sigmoid_sharpness > 0:
            raise ContractViolation("temperature and sharpness must be positive")
        if self.aggregate not in ("mean", "abs"):
            raise ContractViolation("aggregate must be 'mean' or 'abs'")


# --------------------------------------------------------------------------
# finite differences

class _Stencil:
    """Probe layout: theta, two probes per diagonal entry, four per pair."""

    def __init__(self, theta: np.ndarray, step: float):
        self.theta = theta
        D = theta.size
        up_ok = theta + step <= 1.0
        dn_ok = theta - step >= 0.0
        # realised offsets (probe minus centre) so rounding is accounted for
        up = np.where(up_ok, theta + step, theta) - theta
        dn = np.where(dn_ok, theta - step, theta) - theta
        self.u, self.d = up, dn
        # diagonal: central when both sides fit, else two steps to one side
        a = np.where(up_ok & dn_ok, up, np.where(up_ok, up, dn))
        b2 = np.where(up_ok, np.minimum(theta + 2 * step, 1.0), np.maximum(theta - 2 * step, 0.0)) - theta
        b = np.where(up_ok & dn_ok, dn, b2)
        self.a, self.b = a, b
        self.D = D
        self.pi, self.pj = np.triu_indices(D, k=1)
        self.n_probes = 1 + 2 * D + 4 * len(self.pi)

    def owner(self, k: int) -> tuple[int, int]:
        """Hessian entry that probe ``k`` feeds (for error messages)."""
        if k == 0:
            return (0, 0)
        if k <= 2 * self.D:
            i = (k - 1) // 2
            return (i, i)
        p = (k - 1 - 2 * self.D) // 4
        return (int(self.pi[p]), int(self.pj[p]))

    def probes(self, start: int, stop: int) -> np.ndarray:
        D, th = self.D, self.theta
        ks = np.arange(start, stop)
        out = np.repeat(th[None, :], len(ks), axis=0)
        rows = np.arange(len(ks))
        diag = (ks >= 1) & (ks <= 2 * D)
        if diag.any():
            kd = ks[diag] - 1
            i = kd // 2
            off = np.where(kd % 2 == 0, self.a[i], self.b[i])
            out[rows[diag], i] = th[i] + off
        pair = ks > 2 * D
        if pair.any():
            kp = ks[pair] - 1 - 2 * D
            p, c = kp // 4, kp % 4
            i, j = self.pi[p], self.pj[p]
            oi = np.where(c < 2, self.u[i], self.d[i])
            oj = np.where(c % 2 == 0, self.u[j], self.d[j])
            r = rows[pair]
            out[r, i] = th[i] + oi
            out[r, j] = th[j] + oj
        return out

    def assemble(self, vals: np.ndarray) -> np.ndarray:
        """vals has shape (n_probes,) or (n_probes, S); returns (D, D) or (S, D, D)."""
        D = self.D
        v = vals.reshape(self.n_probes, -1)
        H = np.zeros((v.shape[1], D, D))
        f0 = v[0]
        fa, fb = v[1:2 * D + 1:2].T, v[2:2 * D + 2:2].T
        a, b = self.a, self.b
        H[:, np.arange(D), np.arange(D)] = 2.0 * (fa / (a * (a - b)) + fb / (b * (b - a)) + f0[:, None] / (a * b))
        if len(self.pi):
            q = v[2 * D + 1:].reshape(len(self.pi), 4, -1)
            num = q[:, 0] - q[:, 1] - q[:, 2] + q[:, 3]
            den = (self.u[self.pi] - self.d[self.pi]) * (self.u[self.pj] - self.d[self.pj])
            cross = (num / den[:, None]).T
            H[:, self.pi, self.pj] = cross
            H[:, self.pj, self.pi] = cross
        H = 0.5 * (H + np.swapaxes(H, 1, 2))
        return H if vals.ndim > 1 else H[0]


def _check_probe_values(vals: np.ndarray, stencil: _Stencil, start: int) -> None:
    flat = vals.reshape(vals.shape[0], -1)
    bad = np.nonzero(~np.isfinite(flat).all(axis=1))[0]
    if bad.size:
        k = start + int(bad[0])
        i, j = stencil.owner(k)
        raise PoisonedEntryError(i, j, float(flat[bad[0]][~np.isfinite(flat[bad[0]])][0]))


def fd_hessian(f: Callable, theta, cfg: FdConfig = FdConfig(), vectorized: bool = False) -> np.ndarray:
    """Finite-difference Hessian of a scalar function on [0, 1]^D.

    With ``vectorized=True``, ``f`` receives a (P, D) array of probe points
    and returns P values (or a (P, S) array, giving an (S, D, D) result).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if np.any(theta < 0) or np.any(theta > 1):
        raise ContractViolation("theta must lie in the unit cube")
    st = _Stencil(theta, cfg.step)
    chunks = []
    for start in range(0, st.n_probes, cfg.chunk):
        stop = min(start + cfg.chunk, st.n_probes)
        pts = st.probes(start, stop)
        if vectorized:
            vals = np.asarray(f(pts), dtype=float)
        else:
            vals = np.array([f(p) for p in pts], dtype=float)
        if vals.shape[0] != stop - start:
            raise ContractViolation("vectorised function returned the wrong number of values")
        _check_probe_values(vals, st, start)
        chunks.append(vals)
    return st.assemble(np.concatenate(chunks, axis=0))


# --------------------------------------------------------------------------
# Sinkhorn

def sinkhorn_relax(affinity, iters: int = 20, temperature: float = 0.1) -> np.ndarray:
    """Soft permutation: exp(affinity / temperature), then alternate row and
    column normalisation ``iters`` times (log domain). Works on stacks of
    matrices in the last two axes."""
    a = np.asarray(affinity, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ContractViolation(f"affinity must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation("affinity contains non-finite entries")
    if not temperature > 0:
        raise ContractViolation("temperature must be positive")
    logk = a / temperature
    for _ in range(iters):
        logk = logk - logsumexp(logk, axis=-1, keepdims=True)
        logk = logk - logsumexp(logk, axis=-2, keepdims=True)
    return np.exp(logk)


# --------------------------------------------------------------------------
# surrogate policy Hessian

def _scalarise(policy, theta_pts, states):
    # generic callable: policy(theta, state) -> actions for every agent
    out = np.empty((theta_pts.shape[0], len(states)))
    for p, th in enumerate(theta_pts):
        for s, st in enumerate(states):
            out[p, s] = float(np.sum(policy(th, st)))
    return out


def surrogate_policy_hessian(theta, policy, states, cfg: SurrogateHessianConfig = SurrogateHessianConfig()
                             ) -> np.ndarray:
    """Average over ``states`` of the FD Hessian of the summed relaxed actions.

    ``policy`` is either an object with ``relaxed_values(thetas, states)``
    returning a (P, S) array (see ``hom.RelaxedHom``) or a plain callable
    ``policy(theta, state) -> actions``.
    """
    states = np.asarray(states, dtype=float)
    if states.shape[0] == 0:
        raise ContractViolation("state batch is empty")
    if hasattr(policy, "relaxed_values"):
        def f(pts):
            return policy.relaxed_values(pts, states)
    else:
        def f(pts):
            return _scalarise(policy, pts, states)

    if cfg.aggregate == "mean":
        H = fd_hessian(lambda pts: f(pts).mean(axis=1), theta, cfg.fd, vectorized=True)
    else:
        H = np.abs(fd_hessian(f, theta, cfg.fd, vectorized=True)).mean(axis=0)
    return 0.5 * (H + H.T)
