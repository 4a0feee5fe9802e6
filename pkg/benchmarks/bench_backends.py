"""Time the numba and numpy backends on the package's hot paths.

    python3 benchmarks/bench_backends.py [--repeats 5] [--json out.json]

Each case runs once per backend to warm up (numba compiles on first call),
then reports the best of ``--repeats`` timings. Outputs from the two
backends are compared so a speedup never hides a divergence.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from dssbo import _accel
from dssbo.assignment import max_affinity_permutation
from dssbo.envs.base import evaluate_policy
from dssbo.envs.drone import DroneWorld
from dssbo.hom import HomLayout, HomPolicy, RelaxedHom
from dssbo.kernels import AdditiveKernel, KernelSpec


def case_additive_cross():
    rng = np.random.default_rng(0)
    k = AdditiveKernel([(0, 1, 2), (2, 3), (4,), (5, 6, 7, 8), (9,)], KernelSpec("matern52", 0.2), 10)
    X, Y = rng.uniform(size=(400, 10)), rng.uniform(size=(300, 10))
    return "additive_cross 400x300, 5 cliques", lambda: k.cross(X, Y)


def case_relaxed_values():
    rng = np.random.default_rng(1)
    rh = RelaxedHom(HomLayout(3, 7, 2))
    th = rng.uniform(size=(200, rh.layout.size))
    st = rng.uniform(size=(8, 3, 7))
    return "relaxed_values 200 thetas x 8 states", lambda: rh.relaxed_values(th, st)


def case_episodes():
    env = DroneWorld()
    lay = HomLayout(env.n_agents, env.state_dim, env.action_dim)
    pol = HomPolicy(lay, np.random.default_rng(2).uniform(size=lay.size))
    return "gen_policy drone episode x3", lambda: evaluate_policy(env, pol, 0, repeats=3)


def case_hungarian():
    rng = np.random.default_rng(3)
    mats = [rng.integers(-3, 4, (6, 6)).astype(float) for _ in range(500)]
    return "hungarian 500 tied 6x6", lambda: np.array([max_affinity_permutation(m) for m in mats])


CASES = [case_additive_cross, case_relaxed_values, case_episodes, case_hungarian]


def best_time(fn, repeats):
    out = fn()
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    previous = _accel.backend()
    rows = []
    try:
        for make in CASES:
            name, fn = make()
            res = {}
            for b in ("numba", "numpy"):
                _accel.set_backend(b)
                res[b] = best_time(fn, args.repeats)
            same = np.allclose(np.asarray(res["numba"][1]), np.asarray(res["numpy"][1]), rtol=1e-9, atol=1e-12)
            rows.append({"case": name, "numba_s": res["numba"][0], "numpy_s": res["numpy"][0],
                         "speedup": res["numpy"][0] / res["numba"][0], "outputs_agree": bool(same)})
    finally:
        _accel.set_backend(previous)

    print(f"{'case':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  agree")
    for r in rows:
        print(f"{r['case']:40s} {1e3 * r['numba_s']:10.2f} {1e3 * r['numpy_s']:10.2f} "
              f"{r['speedup']:7.1f}x  {r['outputs_agree']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["outputs_agree"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
