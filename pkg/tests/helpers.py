"""Shared builders: small fixed scenarios and seeded random instances.

Everything here is deterministic given the rng passed in, so tests can
freeze expected values against specific seeds.
"""

import math

import numpy as np

from duplexnet import (
    CostParams,
    NetworkScenario,
    Session,
    Utility,
    allocate_subbands,
    build_graph,
    total_cost,
    uniform_state,
)
from duplexnet.coloring import family_from_coloring, min_subband_count
from duplexnet.graph import greedy_coloring
from duplexnet.scenario import derive
from duplexnet.subband import allocation_from_family


def path_graph(n):
    und = [(k, k + 1) for k in range(n - 1)]
    return build_graph(und + [(b, a) for a, b in und])


def cycle_graph(n):
    und = [(k, (k + 1) % n) for k in range(n)]
    return build_graph(und + [(b, a) for a, b in und])


def complete_graph(n):
    return build_graph([(a, b) for a in range(n) for b in range(n) if a != b])


def star_graph(leaves):
    und = [(0, k) for k in range(1, leaves + 1)]
    return build_graph(und + [(b, a) for a, b in und])


def random_connected_graph(rng, n=None, extra=None):
    """Random spanning tree plus a fraction of the remaining pairs."""
    n = int(rng.integers(2, 21)) if n is None else n
    und = {(int(rng.integers(0, k)), k) for k in range(1, n)}
    p = float(rng.uniform(0.0, 0.3)) if extra is None else extra
    for a in range(n):
        for b in range(a + 1, n):
            if (a, b) not in und and rng.random() < p:
                und.add((a, b))
    edges = [(a, b) for a, b in und] + [(b, a) for a, b in und]
    return build_graph(edges)


def _pathloss_gains(pos, band_count, scale=None):
    n = len(pos)
    base = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a != b:
                base[a, b] = max(float(np.hypot(*(pos[a] - pos[b]))), 1e-3) ** -3.5
    if scale is None:
        scale = np.ones(band_count)
    return np.asarray(scale)[:, None, None] * base[None, :, :]


def pair_scenario(demand=0.3, budget=1.0, gain=0.5, noise=1e-3, weight=1.0):
    """Two nodes, one session across the single link."""
    g = build_graph([(0, 1), (1, 0)])
    alloc = allocate_subbands(g, 2)
    gains = np.full((2, 2, 2), gain)
    for q in range(2):
        np.fill_diagonal(gains[q], 0.0)
    return NetworkScenario(
        graph=g,
        allocation=alloc,
        gains=gains,
        noise=np.full((2, 2), noise),
        power_budget=np.full(2, budget),
        sessions=(Session(0, 1, demand, Utility("log", weight)),),
        cost=CostParams(),
    )


def line3_scenario():
    """Three nodes in a row, one session end to end.

    The block solver and the reference search agree on this instance to
    full printed precision, so it anchors the solver-vs-oracle tests.
    """
    g = path_graph(3)
    alloc = allocate_subbands(g, 3, seed=1)
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    return NetworkScenario(
        graph=g,
        allocation=alloc,
        gains=_pathloss_gains(pos, 3),
        noise=np.full((3, 3), 1e-3),
        power_budget=np.ones(3),
        sessions=(Session(0, 2, 0.5, Utility("log", 1.0)),),
        cost=CostParams(),
    )


def line5_scenario():
    """Five nodes in a row; one node past the reference solver's cap."""
    g = path_graph(5)
    alloc = allocate_subbands(g, 3, seed=1)
    pos = np.array([[float(k), 0.0] for k in range(5)])
    return NetworkScenario(
        graph=g,
        allocation=alloc,
        gains=_pathloss_gains(pos, 3),
        noise=np.full((3, 5), 1e-3),
        power_budget=np.ones(5),
        sessions=(Session(0, 4, 0.4, Utility("log", 1.0)),),
        cost=CostParams(),
    )


def square_scenario():
    """Four nodes on a tight square with two crossing sessions.

    Known multistable instance: from the even-split start the block solver
    settles in a corner that rejects one session entirely, while a better
    first-order point carries both sessions.  Used to document that
    behavior, not as an agreement benchmark.
    """
    g = cycle_graph(4)
    alloc = allocate_subbands(g, 3, seed=7)
    pos = np.array([[0.1, 0.2], [0.9, 0.15], [0.85, 0.9], [0.2, 0.8]])
    return NetworkScenario(
        graph=g,
        allocation=alloc,
        gains=_pathloss_gains(pos, 3, np.array([1.0, 0.85, 1.15])),
        noise=np.full((3, 4), 1e-3),
        power_budget=np.ones(4),
        sessions=(
            Session(0, 2, 0.4, Utility("log", 1.0)),
            Session(3, 1, 0.3, Utility("log", 0.8)),
        ),
        cost=CostParams(),
    )


def _mst_edges(pos):
    """Prim's tree over euclidean distances."""
    n = len(pos)
    in_tree = [0]
    out = set(range(1, n))
    edges = []
    while out:
        best = None
        for a in in_tree:
            for b in out:
                d = float(np.hypot(*(pos[a] - pos[b])))
                if best is None or d < best[0]:
                    best = (d, a, b)
        _, a, b = best
        edges.append((a, b))
        in_tree.append(b)
        out.discard(b)
    return edges


def random_scenario(rng, n_nodes=None, band_count=None, n_sessions=None):
    """Geometric instance: MST links plus a few short chords on 3-band
    draws, path-loss gains with per-band jitter, light random sessions.

    Draws are screened so the greedy coloring fits the band count and the
    standard start uniform_state(0.9, 0.1) has finite cost.
    """
    for _ in range(50):
        n = int(n_nodes if n_nodes is not None else rng.integers(4, 9))
        q = int(band_count if band_count is not None else rng.integers(2, 4))
        side = 1.2 * math.sqrt(n)
        pos = rng.uniform(0.0, side, (n, 2))
        und = _mst_edges(pos)
        if q == 3:
            # sprinkle a few short extra edges on top of the tree
            tree = {frozenset(e) for e in und}
            cand = sorted(
                (float(np.hypot(*(pos[a] - pos[b]))), a, b)
                for a in range(n)
                for b in range(a + 1, n)
                if frozenset((a, b)) not in tree
            )
            extra = [e for e in cand[: max(1, n // 2)] if rng.random() < 0.5]
            und += [(a, b) for _, a, b in extra]
        edges = [(a, b) for a, b in und] + [(b, a) for a, b in und]
        g = build_graph(edges)
        coloring = greedy_coloring(g)
        classes = max(coloring) + 1
        if min_subband_count(classes) > q:
            continue
        fam = family_from_coloring(g, coloring, universe_size=q)
        alloc = allocation_from_family(g, fam)
        scale = rng.uniform(0.8, 1.25, q)
        gains = scale[:, None, None] * _pathloss_gains(pos, 1)[0][None, :, :]
        noise = np.full((q, n), 1e-3)
        w = int(n_sessions if n_sessions is not None else rng.integers(1, 4))
        pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
        idx = rng.choice(len(pairs), size=w, replace=False)
        sessions = tuple(
            Session(
                pairs[k][0],
                pairs[k][1],
                float(rng.uniform(0.15, 0.45)),
                Utility("log", float(rng.uniform(0.8, 1.5))),
            )
            for k in idx
        )
        scen = NetworkScenario(
            graph=g,
            allocation=alloc,
            gains=gains,
            noise=noise,
            power_budget=np.ones(n),
            sessions=sessions,
            cost=CostParams(),
        )
        if not math.isfinite(total_cost(scen, uniform_state(scen, power=0.9, overflow=0.1))):
            continue
        return scen
    raise RuntimeError("could not draw a scenario")


def _headroom_ok(scenario, state, frac=0.6):
    der = derive(scenario, state)
    if not math.isfinite(der.total):
        return False
    x = der.physical.sinr
    f = der.flows.band_flow
    r = scenario.cost.bandwidth
    k = scenario.cost.gain_factor
    for e in range(f.shape[0]):
        if f[e] <= 0:
            continue
        if x[e] <= 0 or f[e] > frac * r * math.log(k * x[e]):
            return False
    return True


def random_interior_state(scenario, rng, max_tries=40):
    """Strictly feasible random state with every loaded entry well under
    capacity, so central differences are trustworthy at the point."""
    lay = scenario.layout
    for _ in range(max_tries):
        state = uniform_state(scenario, power=0.5, overflow=0.5)
        for i in range(lay.n):
            bands = np.flatnonzero(lay.rho_mask[i])
            if bands.size:
                state.rho[i, bands] = rng.uniform(0.4, 0.8) * rng.dirichlet(np.ones(bands.size))
        for entries in lay.node_band_entries.values():
            state.eta[entries] = rng.dirichlet(np.ones(entries.size))
        for sl in lay.link_slices:
            state.mu[sl] = rng.dirichlet(np.ones(sl.stop - sl.start))
        for w in range(len(scenario.sessions)):
            state.phi_w[w] = rng.uniform(0.25, 0.75)
            for i in range(lay.n):
                idx = [li for li in lay.out_links[i] if state.phi[w, li] > 0]
                if len(idx) > 1:
                    state.phi[w, idx] = rng.dirichlet(np.ones(len(idx)))
        if _headroom_ok(scenario, state):
            return state
        # admitted flow too aggressive for the sampled split; reject more
        for _ in range(4):
            state.phi_w = 1.0 - (1.0 - state.phi_w) * 0.5
            if _headroom_ok(scenario, state):
                return state
    raise RuntimeError("no interior state found")
