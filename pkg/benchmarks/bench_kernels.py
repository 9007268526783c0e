"""Time the numeric kernels on both backends.

The compiled backend pays a one-time warmup on first call, so each backend
gets an untimed pass before measurement. Run from the repo root:

    python3 benchmarks/bench_kernels.py --sizes 8 32 128 --repeat 200
"""

import argparse
import time

import numpy as np

from duplexnet import (
    CostParams,
    NetworkScenario,
    Session,
    allocate_subbands,
    build_graph,
    kernels,
    min_subband_count,
    uniform_state,
)
from duplexnet.scenario import derive


def ring_scenario(n, seed=0):
    rng = np.random.default_rng(seed)
    edges = []
    for a in range(n):
        b = (a + 1) % n
        edges += [(a, b), (b, a)]
    g = build_graph(edges)
    q = min_subband_count(max(g.degrees()) + 1)
    alloc = allocate_subbands(g, q, seed=seed)
    gains = rng.uniform(0.01, 0.5, size=(q, n, n))
    for band in range(q):
        np.fill_diagonal(gains[band], 0.0)
    return NetworkScenario(
        graph=g,
        allocation=alloc,
        gains=gains,
        noise=np.full((q, n), 1e-3),
        power_budget=np.ones(n),
        sessions=(Session(0, n // 2, 0.4),),
        cost=CostParams(),
    )


def time_backends(scen, repeat):
    lay = scen.layout
    st = uniform_state(scen, 0.9, 0.1)
    der = derive(scen, st)
    phys_args = (
        scen.gains, scen.noise, scen.power_budget, st.rho,
        lay.ent_tx, lay.ent_rx, lay.ent_band, st.eta,
    )
    per_call = {}
    for name, (phys, cost) in kernels.backends().items():
        sinr = phys(*phys_args)[3]
        cost(sinr, der.flows.band_flow, scen.cost.bandwidth, scen.cost.gain_factor)
        t0 = time.perf_counter()
        for _ in range(repeat):
            sinr = phys(*phys_args)[3]
            cost(sinr, der.flows.band_flow, scen.cost.bandwidth, scen.cost.gain_factor)
        per_call[name] = (time.perf_counter() - t0) / repeat
    return per_call


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 32, 128],
                    help="ring sizes to sweep")
    ap.add_argument("--repeat", type=int, default=200,
                    help="timed calls per backend and size")
    args = ap.parse_args(argv)
    print(f"active backend: {kernels.backend_name()}")
    print(f"{'nodes':>6} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for n in args.sizes:
        per_call = time_backends(ring_scenario(n), args.repeat)
        print(
            f"{n:6d} {per_call['numpy'] * 1e6:10.1f}us "
            f"{per_call['numba'] * 1e6:10.1f}us "
            f"{per_call['numpy'] / per_call['numba']:8.2f}x"
        )


if __name__ == "__main__":
    main()
