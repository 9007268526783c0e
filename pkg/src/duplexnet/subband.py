"""Distributed sub-band allocation and incremental topology changes.

Nodes pick their outgoing band sets one at a time: a seed node picks an
arbitrary floor(Q/2)-subset, every later node picks a floor(Q/2)-subset
distinct from all already-processed neighbors, preferring bands that occur
least among those neighbors' sets.  Directed link (i, j) then transmits on
OC_i \\ OC_j.  With Q >= min_subband_count(max_degree + 1) a valid choice
always exists regardless of processing order, so the protocol needs no
coordination beyond one-hop gossip.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .coloring import (
    ColorSetFamily,
    assign_link_colors,
    check_color_sets,
    colors_from_mask,
    mask_from_colors,
    min_subband_count,
)
from .graph import ConnectivityGraph, build_graph


class InsufficientBandsError(ValueError):
    """Band count below the guaranteed-feasible threshold."""


class DegreeBudgetExceededError(ValueError):
    """A joining node asked for more neighbors than the old maximum degree."""


@dataclass(frozen=True)
class SpectrumAllocation:
    """Outgoing band sets per node and band masks per directed link."""

    band_count: int
    outgoing: dict[int, int]
    link_bands: dict[tuple[int, int], int]

    def family(self) -> ColorSetFamily:
        return ColorSetFamily(self.band_count, dict(self.outgoing))

    def bands_of(self, i: int, j: int) -> tuple[int, ...]:
        return colors_from_mask(self.link_bands[(i, j)])

    def outgoing_bands(self, i: int) -> tuple[int, ...]:
        return colors_from_mask(self.outgoing[i])

    def links_on_band(self, band: int) -> tuple[tuple[int, int], ...]:
        bit = 1 << band
        return tuple(sorted(lk for lk, m in self.link_bands.items() if m & bit))


@dataclass(frozen=True)
class AllocationCheck:
    coverage_violations: tuple[tuple[int, int], ...]
    duplexing_violations: tuple[tuple[int, int], ...]  # (node, band)

    @property
    def ok(self) -> bool:
        return not self.coverage_violations and not self.duplexing_violations


@dataclass(frozen=True)
class Leave:
    node: int


@dataclass(frozen=True)
class Join:
    node: int
    neighbors: tuple[int, ...]


@dataclass(frozen=True)
class TopologyResult:
    graph: ConnectivityGraph | None
    allocation: SpectrumAllocation
    disconnected: bool
    components: tuple[frozenset[int], ...]


def _band_preference(
    band_count: int, counts: Sequence[int], rng: random.Random | None
) -> list[int]:
    """Bands by ascending occurrence count; ties by index, or shuffled when seeded."""
    if rng is None:
        tie = list(range(band_count))
    else:
        tie = list(range(band_count))
        rng.shuffle(tie)
    return sorted(range(band_count), key=lambda b: (counts[b], tie[b]))


def _choose_set(
    band_count: int,
    counts: Sequence[int],
    neighbor_masks: Iterable[int],
    rng: random.Random | None,
) -> int:
    """Pick a floor(Q/2)-subset distinct from every neighbor mask.

    Greedy lowest-occurrence choice first; on collision swap the
    highest-occurrence chosen band for the lowest-occurrence unchosen one,
    and if the swap sequence is exhausted fall back to enumerating subsets
    in preference order (each neighbor blocks at most one candidate, so at
    most deg+1 candidates are inspected).
    """
    half = band_count // 2
    taken = set(neighbor_masks)
    pref = _band_preference(band_count, counts, rng)
    chosen = pref[:half]
    mask = mask_from_colors(chosen)
    if mask not in taken:
        return mask
    outs = list(reversed(chosen))
    ins = pref[half:]
    cur = set(chosen)
    for k in range(min(len(outs), len(ins))):
        cur.discard(outs[k])
        cur.add(ins[k])
        mask = mask_from_colors(cur)
        if mask not in taken:
            return mask
    for combo in combinations(pref, half):
        mask = mask_from_colors(combo)
        if mask not in taken:
            return mask
    raise RuntimeError(
        "no feasible band subset exists; the band count violates the protocol guarantee"
    )


def _occurrence_counts(band_count: int, masks: Iterable[int]) -> list[int]:
    counts = [0] * band_count
    for m in masks:
        for b in colors_from_mask(m):
            counts[b] += 1
    return counts


def allocate_subbands(
    g: ConnectivityGraph,
    band_count: int,
    *,
    seed: int | None = None,
    first_node: int | None = None,
) -> SpectrumAllocation:
    """Run the distributed allocation over a seed-randomized sequential order.

    With seed=None the run is fully deterministic: the lowest node id seeds,
    eligible nodes are processed in ascending id order, and band ties break
    by ascending index.  Raises InsufficientBandsError when band_count is
    below min_subband_count(max_degree + 1).
    """
    need = min_subband_count(g.max_degree() + 1)
    if band_count < need:
        raise InsufficientBandsError(
            f"{band_count} bands < {need} required for max degree {g.max_degree()}"
        )
    if band_count > 64:
        raise ValueError("band counts above 64 are not supported")
    rng = random.Random(seed) if seed is not None else None
    if first_node is None:
        first = g.nodes[0] if rng is None else rng.choice(g.nodes)
    else:
        if first_node not in g.nodes:
            raise ValueError(f"unknown first node {first_node}")
        first = first_node
    half = band_count // 2
    outgoing: dict[int, int] = {}
    if rng is None:
        outgoing[first] = (1 << half) - 1
    else:
        outgoing[first] = mask_from_colors(rng.sample(range(band_count), half))
    while len(outgoing) < g.n:
        eligible = sorted(
            v
            for v in g.nodes
            if v not in outgoing and any(u in outgoing for u in g.neighbors(v))
        )
        v = eligible[0] if rng is None else rng.choice(eligible)
        done = [outgoing[u] for u in g.neighbors(v) if u in outgoing]
        counts = _occurrence_counts(band_count, done)
        outgoing[v] = _choose_set(band_count, counts, done, rng)
    fam = ColorSetFamily(band_count, outgoing)
    assert check_color_sets(g, fam).feasible, "protocol produced an infeasible family"
    coloring = assign_link_colors(g, fam)
    return SpectrumAllocation(band_count, outgoing, coloring.masks)


def allocation_from_family(g: ConnectivityGraph, family: ColorSetFamily) -> SpectrumAllocation:
    """Allocation induced by any feasible color-set family."""
    coloring = assign_link_colors(g, family)
    return SpectrumAllocation(family.universe_size, dict(family.masks), coloring.masks)


def check_allocation(g: ConnectivityGraph, alloc: SpectrumAllocation) -> AllocationCheck:
    """Verify coverage (every link has a band) and the duplexing constraint."""
    coverage = []
    for lk in g.links:
        if not alloc.link_bands.get(lk, 0):
            coverage.append(lk)
    transmit: dict[int, set[int]] = {}
    receive: dict[int, set[int]] = {}
    for (i, j), m in alloc.link_bands.items():
        if (i, j) not in g.links:
            continue
        for b in colors_from_mask(m):
            transmit.setdefault(b, set()).add(i)
            receive.setdefault(b, set()).add(j)
    duplexing = []
    for b in sorted(transmit):
        for node in sorted(transmit[b] & receive.get(b, set())):
            duplexing.append((node, b))
    return AllocationCheck(tuple(coverage), tuple(duplexing))


def apply_topology_change(
    g: ConnectivityGraph,
    alloc: SpectrumAllocation,
    change: Leave | Join,
    *,
    seed: int | None = None,
) -> TopologyResult:
    """Apply a node leave or join, touching no unrelated allocation entry.

    Leaving restricts the allocation to the surviving links; it stays
    feasible and a disconnection is reported, not raised.  Joining runs the
    protocol's selection step for the new node against its already-settled
    neighbors; it requires at most max_degree(old graph) neighbors.
    """
    if isinstance(change, Leave):
        if change.node not in g.nodes:
            raise ValueError(f"unknown node {change.node}")
        keep_nodes = [v for v in g.nodes if v != change.node]
        edges = [lk for lk in g.links if change.node not in lk]
        outgoing = {v: alloc.outgoing[v] for v in keep_nodes}
        link_bands = {lk: alloc.link_bands[lk] for lk in edges}
        new_alloc = SpectrumAllocation(alloc.band_count, outgoing, link_bands)
        if not edges:
            comps = tuple(frozenset((v,)) for v in keep_nodes)
            return TopologyResult(None, new_alloc, len(comps) > 1, comps)
        new_g = build_graph(edges, require_connected=False)
        comps = new_g.components()
        isolated = [v for v in keep_nodes if v not in new_g.nodes]
        comps = comps + [frozenset((v,)) for v in isolated]
        return TopologyResult(new_g, new_alloc, len(comps) > 1, tuple(comps))

    if isinstance(change, Join):
        node, neighbors = change.node, tuple(change.neighbors)
        if node in g.nodes:
            raise ValueError(f"node {node} already present")
        if not neighbors:
            raise ValueError("a joining node needs at least one neighbor")
        if len(set(neighbors)) != len(neighbors):
            raise ValueError("duplicate neighbors")
        unknown = [u for u in neighbors if u not in g.nodes]
        if unknown:
            raise ValueError(f"unknown neighbors {unknown}")
        if len(neighbors) > g.max_degree():
            raise DegreeBudgetExceededError(
                f"{len(neighbors)} neighbors exceeds the old maximum degree {g.max_degree()}"
            )
        rng = random.Random(seed) if seed is not None else None
        done = [alloc.outgoing[u] for u in neighbors]
        counts = _occurrence_counts(alloc.band_count, done)
        oc = _choose_set(alloc.band_count, counts, done, rng)
        outgoing = dict(alloc.outgoing)
        outgoing[node] = oc
        link_bands = dict(alloc.link_bands)
        for u in neighbors:
            link_bands[(node, u)] = oc & ~alloc.outgoing[u]
            link_bands[(u, node)] = alloc.outgoing[u] & ~oc
        edges = list(g.links) + [(node, u) for u in neighbors] + [(u, node) for u in neighbors]
        new_g = build_graph(edges)
        new_alloc = SpectrumAllocation(alloc.band_count, outgoing, link_bands)
        return TopologyResult(new_g, new_alloc, False, tuple(new_g.components()))

    raise TypeError(f"unsupported change {change!r}")
