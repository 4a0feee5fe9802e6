"""Maximum-affinity role assignment (Kuhn-Munkres) with deterministic tie-breaking."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _accel
from ._accel import njit


@njit
def _hungarian_min_nb(cost):
    # shortest augmenting path with potentials; rows <= cols
    n, m = cost.shape
    INF = 1e300
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assign = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            assign[p[j] - 1] = j - 1
    return assign


@njit
def _best_total_nb(aff, rows, cols):
    k = rows.size
    if k == 0:
        return 0.0
    sub = np.empty((k, k))
    for a in range(k):
        for b in range(k):
            sub[a, b] = -aff[rows[a], cols[b]]
    assign = _hungarian_min_nb(sub)
    total = 0.0
    for a in range(k):
        total += aff[rows[a], cols[assign[a]]]
    return total


@njit
def _lex_assign_nb(aff):
    n = aff.shape[0]
    all_idx = np.arange(n)
    best = _best_total_nb(aff, all_idx, all_idx)
    tol = 1e-12 * max(1.0, abs(best)) * n
    perm = np.empty(n, dtype=np.int64)
    free = np.ones(n, dtype=np.bool_)
    fixed = 0.0
    for i in range(n):
        rest_rows = np.arange(i + 1, n)
        for j in range(n):
            if not free[j]:
                continue
            free[j] = False
            cols = np.nonzero(free)[0]
            total = fixed + aff[i, j] + _best_total_nb(aff, rest_rows, cols)
            if total >= best - tol:
                perm[i] = j
                fixed += aff[i, j]
                break
            free[j] = True
    return perm


def _best_total_np(aff, rows, cols):
    if len(rows) == 0:
        return 0.0
    sub = aff[np.ix_(rows, cols)]
    r, c = linear_sum_assignment(sub, maximize=True)
    return float(sum(sub[a, b] for a, b in zip(r, c)))


def _lex_assign_np(aff):
    n = aff.shape[0]
    idx = np.arange(n)
    best = _best_total_np(aff, idx, idx)
    tol = 1e-12 * max(1.0, abs(best)) * n
    perm = np.empty(n, dtype=np.int64)
    free = np.ones(n, dtype=bool)
    fixed = 0.0
    for i in range(n):
        for j in range(n):
            if not free[j]:
                continue
            free[j] = False
            total = fixed + aff[i, j] + _best_total_np(aff, idx[i + 1:], np.nonzero(free)[0])
            if total >= best - tol:
                perm[i], fixed = j, fixed + aff[i, j]
                break
            free[j] = True
    return perm


def max_affinity_permutation(aff: np.ndarray) -> np.ndarray:
    """perm[i] = column assigned to row i, maximising sum(aff[i, perm[i]]).

    Among optimal permutations the lexicographically smallest is returned.
    """
    aff = np.ascontiguousarray(aff, dtype=float)
    if aff.ndim != 2 or aff.shape[0] != aff.shape[1]:
        raise ValueError(f"affinity must be square, got shape {aff.shape}")
    if aff.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if _accel.use_numba():
        return _lex_assign_nb(aff)
    return _lex_assign_np(aff)
