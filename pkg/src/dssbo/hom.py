"""Higher-order multi-agent policy.

A flat parameter vector in the unit cube is decoded into four tiny tanh
MLPs:

* role     state -> one affinity score per role (shared trunk, n heads)
* edge     (state_i, state_j) -> scalar; an edge exists where it is > 0
* message  (h_i, h_j, role_i, role_j) -> message vector
* update   (state, h, summed message) -> new hidden state

At every step agents are matched to roles by maximum total affinity, an
interaction graph over roles is built from the edge scores, and ``tau``
rounds of message passing produce the hidden states whose leading
coordinates are the actions.

``RelaxedHom`` is the smooth counterpart used for Hessian queries: a
Sinkhorn soft permutation replaces the matching and sigmoid weights
replace hard edges.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _accel
from ._accel import njit
from .assignment import _lex_assign_nb, max_affinity_permutation
from .errors import ContractViolation


# --------------------------------------------------------------------------
# MLPs

@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    out_dim: int
    hidden_layers: int = 3
    hidden_width: int = 4

    def __post_init__(self):
        if min(self.in_dim, self.out_dim, self.hidden_width) < 1 or self.hidden_layers < 0:
            raise ContractViolation(f"invalid MLP dimensions {self}")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) per affine layer."""
        dims = [self.in_dim] + [self.hidden_width] * self.hidden_layers + [self.out_dim]
        return [(dims[k + 1], dims[k]) for k in range(len(dims) - 1)]

    @property
    def n_params(self) -> int:
        return sum((i + 1) * o for o, i in self.layer_shapes())


def _split_layers(spec: MlpSpec, w: np.ndarray):
    # w: (..., n_params) -> list of (W (..., out, in), b (..., out))
    layers, p = [], 0
    lead = w.shape[:-1]
    for o, i in spec.layer_shapes():
        W = w[..., p:p + o * i].reshape(lead + (o, i))
        p += o * i
        b = w[..., p:p + o]
        p += o
        layers.append((W, b))
    return layers


def mlp_forward(spec: MlpSpec, weights, x) -> np.ndarray:
    """tanh hidden layers, linear output. ``x`` may carry leading batch axes."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != (spec.n_params,):
        raise ContractViolation(f"expected {spec.n_params} weights, got {w.shape}")
    if x.shape[-1:] != (spec.in_dim,):
        raise ContractViolation(f"expected input width {spec.in_dim}, got {x.shape}")
    return _mlp_batch(spec, w[None], x[None])[0]


def _mlp_batch(spec: MlpSpec, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """w: (P, n_params); x: (P, ..., in) -> (P, ..., out)."""
    layers = _split_layers(spec, w)
    x = np.broadcast_to(x, (w.shape[0],) + x.shape[1:])
    extra = x.ndim - 2
    for k, (W, b) in enumerate(layers):
        x = np.einsum("p...i,poi->p...o", x, W) + b.reshape((b.shape[0],) + (1,) * extra + (b.shape[1],))
        if k < len(layers) - 1:
            x = np.tanh(x)
    return x


# --------------------------------------------------------------------------
# parameter layout

BLOCKS = ("theta_r", "theta_gv", "theta_geta", "theta_ge")


@dataclass(frozen=True)
class HomLayout:
    n_agents: int
    state_dim: int
    action_dim: int
    hidden_layers: int = 3
    hidden_width: int = 4
    weight_range: float = 2.0

    def __post_init__(self):
        if min(self.n_agents, self.state_dim, self.action_dim) < 1:
            raise ContractViolation("n_agents, state_dim and action_dim must be positive")
        if not self.weight_range > 0:
            raise ContractViolation("weight_range must be positive")

    @property
    def hidden_dim(self) -> int:
        return max(self.action_dim, 4)

    def specs(self) -> dict[str, MlpSpec]:
        H, L, W = self.hidden_dim, self.hidden_layers, self.hidden_width
        return {
            "theta_r": MlpSpec(self.state_dim, self.n_agents, L, W),
            "theta_gv": MlpSpec(2 * self.state_dim, 1, L, W),
            "theta_geta": MlpSpec(2 * H + 2, H, L, W),
            "theta_ge": MlpSpec(self.state_dim + 2 * H, H, L, W),
        }

    def offsets(self) -> dict[str, tuple[int, int]]:
        out, p = {}, 0
        for name, spec in self.specs().items():
            out[name] = (p, p + spec.n_params)
            p += spec.n_params
        return out

    @property
    def size(self) -> int:
        return sum(s.n_params for s in self.specs().values())

    def describe(self) -> dict:
        """Plain-data descriptor, enough to decode a stored theta offline."""
        offs = self.offsets()
        return {
            "n_agents": self.n_agents, "state_dim": self.state_dim, "action_dim": self.action_dim,
            "hidden_layers": self.hidden_layers, "hidden_width": self.hidden_width,
            "weight_range": self.weight_range, "hidden_dim": self.hidden_dim, "size": self.size,
            "blocks": [{"name": n, "offset": offs[n][0], "size": s.n_params,
                        "layers": [list(sh) for sh in s.layer_shapes()]}
                       for n, s in self.specs().items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.describe(), indent=1)

    @classmethod
    def from_descriptor(cls, d) -> "HomLayout":
        if isinstance(d, str):
            d = json.loads(d)
        layout = cls(d["n_agents"], d["state_dim"], d["action_dim"], d["hidden_layers"],
                     d["hidden_width"], d["weight_range"])
        if layout.size != d["size"]:
            raise ContractViolation("descriptor size does not match its dimensions")
        return layout


class HomParams:
    """Cube coordinates of a HOM together with the decoded weight blocks.

    The cube vector is the stored representation, so packing is exact.
    Weights are ``weight_range * (2 * theta - 1)``.
    """

    def __init__(self, layout: HomLayout, theta):
        theta = np.array(theta, dtype=float).ravel()
        if theta.size != layout.size:
            raise ContractViolation(f"theta has length {theta.size}, layout needs {layout.size}")
        theta.setflags(write=False)
        self.layout = layout
        self.theta = theta
        self.weights = layout.weight_range * (2.0 * theta - 1.0)
        self.weights.setflags(write=False)

    def block(self, name: str) -> np.ndarray:
        a, b = self.layout.offsets()[name]
        return self.weights[a:b]

    theta_r = property(lambda self: self.block("theta_r"))
    theta_gv = property(lambda self: self.block("theta_gv"))
    theta_geta = property(lambda self: self.block("theta_geta"))
    theta_ge = property(lambda self: self.block("theta_ge"))

    @classmethod
    def from_weights(cls, layout: HomLayout, **blocks) -> "HomParams":
        """Build from explicit weight blocks (missing blocks are zero)."""
        w = np.zeros(layout.size)
        offs = layout.offsets()
        for name, val in blocks.items():
            if name not in offs:
                raise ContractViolation(f"unknown block {name!r}")
            a, b = offs[name]
            w[a:b] = np.asarray(val, dtype=float).ravel()
        return cls(layout, (w / layout.weight_range + 1.0) / 2.0)


def unpack_params(theta, layout: HomLayout) -> HomParams:
    return HomParams(layout, theta)


def pack_params(params: HomParams) -> np.ndarray:
    return params.theta.copy()


# --------------------------------------------------------------------------
# discrete policy

@dataclass(frozen=True)
class RoleAssignment:
    perm: np.ndarray
    total_affinity: float


@dataclass(frozen=True)
class InteractionGraph:
    """neighbors[i] lists the roles sending messages to role i."""
    neighbors: tuple

    @property
    def n_edges(self) -> int:
        return sum(len(n) for n in self.neighbors)


def hungarian_assign(affinity) -> RoleAssignment:
    """``affinity[i, l]`` = score of agent l in role i; perm[i] = agent for role i."""
    aff = np.asarray(affinity, dtype=float)
    if not np.all(np.isfinite(aff)):
        raise ContractViolation("affinity contains non-finite entries")
    perm = max_affinity_permutation(aff)
    return RoleAssignment(perm, float(aff[np.arange(len(perm)), perm].sum()))


def role_affinity(states: np.ndarray, w_r: np.ndarray, layout: HomLayout) -> np.ndarray:
    out = mlp_forward(layout.specs()["theta_r"], w_r, states)
    return out.T


def role_interaction_edges(role_states, w_gv, layout: HomLayout, self_edges: bool = False
                           ) -> InteractionGraph:
    s = np.asarray(role_states, dtype=float)
    n = s.shape[0]
    pairs = np.concatenate([np.repeat(s[:, None], n, 1), np.repeat(s[None, :], n, 0)], axis=-1)
    score = mlp_forward(layout.specs()["theta_gv"], w_gv, pairs)[..., 0]
    nbrs = tuple(tuple(l for l in range(n) if (self_edges or l != i) and score[i, l] > 0) for i in range(n))
    return InteractionGraph(nbrs)


def _role_features(n: int) -> np.ndarray:
    return (np.arange(n) + 1.0) / n


def mpnn_infer(role_states, graph: InteractionGraph, w_eta, w_e, layout: HomLayout, tau: int = 2
               ) -> np.ndarray:
    """Message passing over the role graph; returns clamped actions per role."""
    if tau < 1:
        raise ContractViolation("tau must be >= 1")
    s = np.asarray(role_states, dtype=float)
    n, H = s.shape[0], layout.hidden_dim
    specs = layout.specs()
    feat = _role_features(n)
    h = mlp_forward(specs["theta_ge"], w_e, np.concatenate([s, np.zeros((n, 2 * H))], axis=1))
    src = [(i, l) for i in range(n) for l in graph.neighbors[i]]
    for _ in range(tau):
        m = np.zeros((n, H))
        if src:
            ii = np.array([e[0] for e in src])
            ll = np.array([e[1] for e in src])
            x = np.concatenate([h[ii], h[ll], feat[ii, None], feat[ll, None]], axis=1)
            msgs = mlp_forward(specs["theta_geta"], w_eta, x)
            for k, i in enumerate(ii):
                m[i] += msgs[k]
        h = mlp_forward(specs["theta_ge"], w_e, np.concatenate([s, h, m], axis=1))
    return np.clip(h[:, :layout.action_dim], -1.0, 1.0)


@dataclass
class PolicyStep:
    actions: np.ndarray
    assignment: RoleAssignment
    graph: InteractionGraph


@njit
def _gen_policy_nb(w, st, ints):
    n, sd, ad, H = ints[0], ints[1], ints[2], ints[3]
    L, width = ints[4], ints[5]
    off_r, off_v, off_m, off_u = ints[6], ints[7], ints[8], ints[9]
    tau, self_edges = ints[10], ints[12]
    big = max(2 * sd, 2 * H + 2, sd + 2 * H, width, n)
    xin = np.empty(big)
    ya = np.empty(big)
    yb = np.empty(big)
    res = np.empty(big)
    aff = np.empty((n, n))
    for l in range(n):
        for q in range(sd):
            xin[q] = st[l, q]
        _mlp_into(w, off_r, sd, L, width, n, xin, res, ya, yb)
        for i in range(n):
            aff[i, l] = res[i]
    perm = _lex_assign_nb(aff)
    rs = np.empty((n, sd))
    for i in range(n):
        for q in range(sd):
            rs[i, q] = st[perm[i], q]
    adj = np.zeros((n, n), dtype=np.bool_)
    for i in range(n):
        for l in range(n):
            if l == i and self_edges == 0:
                continue
            for q in range(sd):
                xin[q] = rs[i, q]
                xin[sd + q] = rs[l, q]
            _mlp_into(w, off_v, 2 * sd, L, width, 1, xin, res, ya, yb)
            adj[i, l] = res[0] > 0.0
    h = np.empty((n, H))
    hn = np.empty((n, H))
    m = np.empty((n, H))
    for i in range(n):
        for q in range(sd):
            xin[q] = rs[i, q]
        for q in range(2 * H):
            xin[sd + q] = 0.0
        _mlp_into(w, off_u, sd + 2 * H, L, width, H, xin, res, ya, yb)
        for q in range(H):
            h[i, q] = res[q]
    for _ in range(tau):
        for i in range(n):
            for q in range(H):
                m[i, q] = 0.0
            for l in range(n):
                if not adj[i, l]:
                    continue
                for q in range(H):
                    xin[q] = h[i, q]
                    xin[H + q] = h[l, q]
                xin[2 * H] = (i + 1.0) / n
                xin[2 * H + 1] = (l + 1.0) / n
                _mlp_into(w, off_m, 2 * H + 2, L, width, H, xin, res, ya, yb)
                for q in range(H):
                    m[i, q] += res[q]
        for i in range(n):
            for q in range(sd):
                xin[q] = rs[i, q]
            for q in range(H):
                xin[sd + q] = h[i, q]
                xin[sd + H + q] = m[i, q]
            _mlp_into(w, off_u, sd + 2 * H, L, width, H, xin, res, ya, yb)
            for q in range(H):
                hn[i, q] = res[q]
        for i in range(n):
            for q in range(H):
                h[i, q] = hn[i, q]
    actions = np.empty((n, ad))
    for i in range(n):
        for c in range(ad):
            actions[perm[i], c] = min(1.0, max(-1.0, h[i, c]))
    total = 0.0
    for i in range(n):
        total += aff[i, perm[i]]
    return actions, perm, adj, total


def _layout_ints(layout: HomLayout, tau: int, iters: int, self_edges: bool) -> np.ndarray:
    offs = layout.offsets()
    return np.array([layout.n_agents, layout.state_dim, layout.action_dim, layout.hidden_dim,
                     layout.hidden_layers, layout.hidden_width, offs["theta_r"][0], offs["theta_gv"][0],
                     offs["theta_geta"][0], offs["theta_ge"][0], tau, iters, int(self_edges)], dtype=np.int64)


def gen_policy(states, params: HomParams, tau: int = 2, self_edges: bool = False,
               return_details: bool = False):
    """Actions for every agent, in agent order."""
    layout = params.layout
    s = np.asarray(states, dtype=float)
    if s.shape != (layout.n_agents, layout.state_dim):
        raise ContractViolation(f"states must have shape {(layout.n_agents, layout.state_dim)}, got {s.shape}")
    if tau < 1:
        raise ContractViolation("tau must be >= 1")
    if _accel.use_numba():
        if not np.all(np.isfinite(s)):
            raise ContractViolation("states contain non-finite entries")
        actions, perm, adj, total = _gen_policy_nb(params.weights, np.ascontiguousarray(s),
                                                   _layout_ints(layout, tau, 0, self_edges))
        if not return_details:
            return actions
        graph = InteractionGraph(tuple(tuple(int(l) for l in np.nonzero(adj[i])[0]) for i in range(len(perm))))
        return PolicyStep(actions, RoleAssignment(perm, float(total)), graph)
    assign = hungarian_assign(role_affinity(s, params.theta_r, layout))
    role_states = s[assign.perm]
    graph = role_interaction_edges(role_states, params.theta_gv, layout, self_edges)
    a_roles = mpnn_infer(role_states, graph, params.theta_geta, params.theta_ge, layout, tau)
    actions = np.empty_like(a_roles)
    actions[assign.perm] = a_roles
    if return_details:
        return PolicyStep(actions, assign, graph)
    return actions


class HomPolicy:
    """Callable ``states -> actions`` bound to one parameter vector."""

    def __init__(self, layout: HomLayout, theta, tau: int = 2, self_edges: bool = False):
        self.params = unpack_params(theta, layout)
        self.layout, self.tau, self.self_edges = layout, tau, self_edges

    def __call__(self, states) -> np.ndarray:
        return gen_policy(states, self.params, self.tau, self.self_edges)


# --------------------------------------------------------------------------
# relaxed policy for Hessian queries

@njit
def _mlp_into(w, off, in_dim, L, width, out_dim, x, out, buf_a, buf_b):
    p = off
    cur = x
    cur_n = in_dim
    for layer in range(L + 1):
        last = layer == L
        n_out = out_dim if last else width
        if last:
            dst = out
        elif layer % 2 == 0:
            dst = buf_a
        else:
            dst = buf_b
        bias = p + n_out * cur_n
        for o in range(n_out):
            acc = w[bias + o]
            base = p + o * cur_n
            for q in range(cur_n):
                acc += w[base + q] * cur[q]
            dst[o] = acc if last else math.tanh(acc)
        p = bias + n_out
        cur = dst
        cur_n = n_out


@njit
def _sinkhorn_nb(logk, iters, Pm):
    # scaling-domain iterations; falls back to the log domain on underflow
    n = logk.shape[0]
    for i in range(n):
        mx = -np.inf
        for l in range(n):
            mx = max(mx, logk[i, l])
        for l in range(n):
            Pm[i, l] = math.exp(logk[i, l] - mx)
    for _ in range(iters):
        for i in range(n):
            acc = 0.0
            for l in range(n):
                acc += Pm[i, l]
            for l in range(n):
                Pm[i, l] /= acc
        for l in range(n):
            acc = 0.0
            for i in range(n):
                acc += Pm[i, l]
            if acc == 0.0:
                _sinkhorn_log_nb(logk, iters, Pm)
                return
            for i in range(n):
                Pm[i, l] /= acc


@njit
def _sinkhorn_log_nb(logk, iters, Pm):
    n = logk.shape[0]
    lk = logk.copy()
    for _ in range(iters):
        for i in range(n):
            mx = -np.inf
            for l in range(n):
                mx = max(mx, lk[i, l])
            acc = 0.0
            for l in range(n):
                acc += math.exp(lk[i, l] - mx)
            lse = mx + math.log(acc)
            for l in range(n):
                lk[i, l] -= lse
        for l in range(n):
            mx = -np.inf
            for i in range(n):
                mx = max(mx, lk[i, l])
            acc = 0.0
            for i in range(n):
                acc += math.exp(lk[i, l] - mx)
            lse = mx + math.log(acc)
            for i in range(n):
                lk[i, l] -= lse
    for i in range(n):
        for l in range(n):
            Pm[i, l] = math.exp(lk[i, l])


@njit
def _relaxed_values_nb(W, states, ints, floats):
    n, sd, ad, H = ints[0], ints[1], ints[2], ints[3]
    L, width = ints[4], ints[5]
    off_r, off_v, off_m, off_u = ints[6], ints[7], ints[8], ints[9]
    tau, iters, self_edges = ints[10], ints[11], ints[12]
    temp, sharp, wrange = floats[0], floats[1], floats[2]
    P, S = W.shape[0], states.shape[0]
    out = np.zeros((P, S))
    big = max(2 * sd, 2 * H + 2, sd + 2 * H, width, n)
    xin = np.empty(big)
    ya = np.empty(big)
    yb = np.empty(big)
    res = np.empty(big)
    logk = np.empty((n, n))
    Pm = np.empty((n, n))
    rs = np.empty((n, sd))
    we = np.empty((n, n))
    h = np.empty((n, H))
    hn = np.empty((n, H))
    m = np.empty((n, H))
    w = np.empty(W.shape[1])
    for p in range(P):
        for k in range(W.shape[1]):
            w[k] = wrange * (2.0 * W[p, k] - 1.0)
        for s in range(S):
            st = states[s]
            for l in range(n):
                for q in range(sd):
                    xin[q] = st[l, q]
                _mlp_into(w, off_r, sd, L, width, n, xin, res, ya, yb)
                for i in range(n):
                    logk[i, l] = res[i] / temp
            _sinkhorn_nb(logk, iters, Pm)
            for i in range(n):
                for q in range(sd):
                    acc = 0.0
                    for l in range(n):
                        acc += Pm[i, l] * st[l, q]
                    rs[i, q] = acc
            for i in range(n):
                for l in range(n):
                    if l == i and self_edges == 0:
                        we[i, l] = 0.0
                        continue
                    for q in range(sd):
                        xin[q] = rs[i, q]
                        xin[sd + q] = rs[l, q]
                    _mlp_into(w, off_v, 2 * sd, L, width, 1, xin, res, ya, yb)
                    we[i, l] = 1.0 / (1.0 + math.exp(-sharp * res[0]))
            for i in range(n):
                for q in range(sd):
                    xin[q] = rs[i, q]
                for q in range(2 * H):
                    xin[sd + q] = 0.0
                _mlp_into(w, off_u, sd + 2 * H, L, width, H, xin, res, ya, yb)
                for q in range(H):
                    h[i, q] = res[q]
            for _ in range(tau):
                for i in range(n):
                    for q in range(H):
                        m[i, q] = 0.0
                    for l in range(n):
                        if we[i, l] == 0.0:
                            continue
                        for q in range(H):
                            xin[q] = h[i, q]
                            xin[H + q] = h[l, q]
                        xin[2 * H] = (i + 1.0) / n
                        xin[2 * H + 1] = (l + 1.0) / n
                        _mlp_into(w, off_m, 2 * H + 2, L, width, H, xin, res, ya, yb)
                        for q in range(H):
                            m[i, q] += we[i, l] * res[q]
                for i in range(n):
                    for q in range(sd):
                        xin[q] = rs[i, q]
                    for q in range(H):
                        xin[sd + q] = h[i, q]
                        xin[sd + H + q] = m[i, q]
                    _mlp_into(w, off_u, sd + 2 * H, L, width, H, xin, res, ya, yb)
                    for q in range(H):
                        hn[i, q] = res[q]
                for i in range(n):
                    for q in range(H):
                        h[i, q] = hn[i, q]
            total = 0.0
            for l in range(n):
                for c in range(ad):
                    acc = 0.0
                    for i in range(n):
                        acc += Pm[i, l] * h[i, c]
                    total += acc
            out[p, s] = total
    return out


def _relaxed_values_np(W, states, layout: HomLayout, tau, iters, temp, sharp, self_edges):
    from .hessian import sinkhorn_relax

    P = W.shape[0]
    n, sd, ad, H = layout.n_agents, layout.state_dim, layout.action_dim, layout.hidden_dim
    w = layout.weight_range * (2.0 * W - 1.0)
    specs, offs = layout.specs(), layout.offsets()
    blk = {k: w[:, a:b] for k, (a, b) in offs.items()}
    S = states.shape[0]
    X = np.broadcast_to(states[None], (P,) + states.shape)
    A = np.swapaxes(_mlp_batch(specs["theta_r"], blk["theta_r"], X), -1, -2)
    Pm = sinkhorn_relax(A, iters, temp)
    rs = Pm @ X
    pairs = np.concatenate([np.broadcast_to(rs[:, :, :, None], (P, S, n, n, sd)),
                            np.broadcast_to(rs[:, :, None, :], (P, S, n, n, sd))], axis=-1)
    e = _mlp_batch(specs["theta_gv"], blk["theta_gv"], pairs)[..., 0]
    we = 1.0 / (1.0 + np.exp(-sharp * e))
    if not self_edges:
        we = we * (1.0 - np.eye(n))
    h = _mlp_batch(specs["theta_ge"], blk["theta_ge"], np.concatenate([rs, np.zeros((P, S, n, 2 * H))], -1))
    feat = _role_features(n)
    fi = np.broadcast_to(feat[:, None, None], (n, n, 1))
    fl = np.broadcast_to(feat[None, :, None], (n, n, 1))
    for _ in range(tau):
        x = np.concatenate([np.broadcast_to(h[:, :, :, None], (P, S, n, n, H)),
                            np.broadcast_to(h[:, :, None, :], (P, S, n, n, H)),
                            np.broadcast_to(fi, (P, S, n, n, 1)), np.broadcast_to(fl, (P, S, n, n, 1))], -1)
        msg = _mlp_batch(specs["theta_geta"], blk["theta_geta"], x)
        m = np.einsum("psil,psilh->psih", we, msg)
        h = _mlp_batch(specs["theta_ge"], blk["theta_ge"], np.concatenate([rs, h, m], -1))
    a = h[..., :ad]
    agent_actions = np.swapaxes(Pm, -1, -2) @ a
    return agent_actions.sum(axis=(-1, -2))


class RelaxedHom:
    """Smooth HOM surrogate: ``relaxed_values(thetas, states)`` gives, for each
    cube vector and each joint state, the sum of all agents' action coordinates."""

    def __init__(self, layout: HomLayout, tau: int = 2, sinkhorn_iters: int = 20,
                 temperature: float = 0.1, sharpness: float = 10.0, self_edges: bool = False):
        self.layout, self.tau = layout, tau
        self.iters, self.temperature, self.sharpness = sinkhorn_iters, temperature, sharpness
        self.self_edges = self_edges

    @classmethod
    def from_config(cls, layout: HomLayout, cfg, tau: int = 2, self_edges: bool = False) -> "RelaxedHom":
        return cls(layout, tau, cfg.sinkhorn_iters, cfg.sinkhorn_temperature, cfg.edge_sigmoid_sharpness,
                   self_edges)

    def _meta(self):
        ints = _layout_ints(self.layout, self.tau, self.iters, self.self_edges)
        return ints, np.array([self.temperature, self.sharpness, self.layout.weight_range])

    def relaxed_values(self, thetas, states) -> np.ndarray:
        W = np.ascontiguousarray(np.atleast_2d(np.asarray(thetas, dtype=float)))
        st = np.ascontiguousarray(np.asarray(states, dtype=float))
        L = self.layout
        if W.shape[1] != L.size:
            raise ContractViolation(f"theta has length {W.shape[1]}, layout needs {L.size}")
        if st.ndim != 3 or st.shape[1:] != (L.n_agents, L.state_dim):
            raise ContractViolation(f"states must have shape (S, {L.n_agents}, {L.state_dim})")
        if _accel.use_numba():
            return _relaxed_values_nb(W, st, *self._meta())
        return _relaxed_values_np(W, st, L, self.tau, self.iters, self.temperature, self.sharpness,
                                  self.self_edges)

    def value(self, theta, states) -> float:
        return float(self.relaxed_values(theta, states).mean())


class TeamPolicy:
    """Independent HOMs acting on disjoint agent teams, parameters concatenated.

    No parameter of one team ever reaches another team's outputs, so the
    policy Hessian is block diagonal by construction.
    """

    def __init__(self, teams: Sequence[tuple[Sequence[int], HomLayout]], tau: int = 2, **relax):
        self.teams = [(np.asarray(idx, dtype=int), lay) for idx, lay in teams]
        for idx, lay in self.teams:
            if len(idx) != lay.n_agents:
                raise ContractViolation("team size does not match its layout")
        sizes = [lay.size for _, lay in self.teams]
        self.bounds = np.cumsum([0] + sizes)
        self.size = int(self.bounds[-1])
        self.n_agents = sum(len(i) for i, _ in self.teams)
        self.tau = tau
        self._relaxed = [RelaxedHom(lay, tau, **relax) for _, lay in self.teams]

    def __call__(self, theta, states) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        states = np.asarray(states, dtype=float)
        actions = None
        for k, (idx, lay) in enumerate(self.teams):
            a = gen_policy(states[idx], unpack_params(theta[self.bounds[k]:self.bounds[k + 1]], lay), self.tau)
            if actions is None:
                actions = np.zeros((self.n_agents, a.shape[1]))
            actions[idx] = a
        return actions

    def relaxed_values(self, thetas, states) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        states = np.asarray(states, dtype=float)
        total = 0.0
        for k, (idx, _) in enumerate(self.teams):
            sub = thetas[:, self.bounds[k]:self.bounds[k + 1]]
            total = total + self._relaxed[k].relaxed_values(sub, states[:, idx])
        return total
