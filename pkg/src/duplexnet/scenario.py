"""Network model: scenario data, control variables, and the cost evaluator.

A scenario fixes the physical side of the problem: the connectivity graph,
a duplexing-feasible sub-band allocation, per-band channel gains and noise,
per-node power budgets, traffic sessions, and the queueing-cost family.
The control state holds everything the optimizer moves: per-node power
splits across bands (rho), per-entry power splits across a node's links on
a band (eta), per-session routing fractions (phi) plus an overflow fraction
(phi_w), and per-link flow splits across bands (mu).

Evaluation proceeds in two independent halves.  The physical half turns
(rho, eta) into per-entry SINR through the interference model in
:mod:`duplexnet.kernels`.  The flow half turns (phi, phi_w, mu) into
per-entry flows by routing each session's admitted traffic through the
positive-fraction subgraph, which must be acyclic.  The two meet in the
link cost F/(C - F) with capacity C = bandwidth * ln(gain_factor * sinr),
plus a per-session overflow cost from the utility forgone on rejected
traffic.  A zero-flow entry costs zero no matter how bad its SINR; a
loaded entry with F >= C or C <= 0 costs +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .graph import ConnectivityGraph
from .subband import SpectrumAllocation, check_allocation


class CycleDetectedError(ValueError):
    """The positive routing fractions of some session contain a cycle."""

    def __init__(self, session: int, nodes=()):
        self.session = session
        self.nodes = tuple(nodes)
        msg = f"routing cycle in session {session}"
        if self.nodes:
            msg += f" among nodes {sorted(self.nodes)}"
        super().__init__(msg)


class OutOfDomainError(ValueError):
    """Cost derivatives requested outside the finite-cost domain."""


@dataclass(frozen=True)
class Utility:
    """Concave session utility; overflow cost is the utility forgone.

    kind "log" is weight * ln(1 + rate); kind "linear" is weight * rate.
    """

    kind: str = "log"
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in ("log", "linear"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.weight <= 0:
            raise ValueError("utility weight must be positive")

    def value(self, rate: float) -> float:
        if self.kind == "log":
            return self.weight * math.log1p(rate)
        return self.weight * rate

    def overflow_cost(self, rejected: float, demand: float) -> float:
        return self.value(demand) - self.value(demand - rejected)

    def overflow_derivative(self, rejected: float, demand: float) -> float:
        if self.kind == "log":
            return self.weight / (1.0 + demand - rejected)
        return self.weight


@dataclass(frozen=True)
class Session:
    origin: object
    dest: object
    demand: float
    utility: Utility = field(default_factory=Utility)

    def __post_init__(self):
        if self.origin == self.dest:
            raise ValueError("session origin equals destination")
        if self.demand <= 0:
            raise ValueError("session demand must be positive")


@dataclass(frozen=True)
class CostParams:
    """Capacity model C(x) = bandwidth * ln(gain_factor * x)."""

    bandwidth: float = 1.0
    gain_factor: float = 50.0

    def __post_init__(self):
        if self.bandwidth <= 0 or self.gain_factor <= 0:
            raise ValueError("bandwidth and gain_factor must be positive")

    def capacity(self, sinr: float) -> float:
        if sinr <= 0:
            raise OutOfDomainError("capacity needs sinr > 0")
        return self.bandwidth * math.log(self.gain_factor * sinr)


@dataclass(frozen=True)
class Layout:
    """Flattened index arrays for one scenario, shared by all evaluations.

    Entries are the active (link, band) pairs, grouped by link and ordered
    by band within a link, so a link's entries form one contiguous slice.
    """

    links: tuple
    link_index: dict
    ent_tx: np.ndarray
    ent_rx: np.ndarray
    ent_band: np.ndarray
    ent_link: np.ndarray
    link_slices: tuple
    out_links: tuple
    node_band_entries: dict
    rho_mask: np.ndarray
    origin: np.ndarray
    dest: np.ndarray

    @property
    def n(self) -> int:
        return self.rho_mask.shape[0]

    @property
    def band_count(self) -> int:
        return self.rho_mask.shape[1]

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_entries(self) -> int:
        return self.ent_tx.shape[0]


@dataclass(eq=False)
class NetworkScenario:
    """Immutable-by-convention bundle of everything but the control state.

    gains has shape [bands, n, n] indexed [band, tx, rx]; noise has shape
    [bands, n]; power_budget has shape [n].  Node order follows graph.nodes.
    """

    graph: ConnectivityGraph
    allocation: SpectrumAllocation
    gains: np.ndarray
    noise: np.ndarray
    power_budget: np.ndarray
    sessions: tuple
    cost: CostParams = field(default_factory=CostParams)

    def __post_init__(self):
        g = self.graph
        n = g.n
        q = self.allocation.band_count
        self.gains = np.ascontiguousarray(self.gains, dtype=np.float64)
        self.noise = np.ascontiguousarray(self.noise, dtype=np.float64)
        self.power_budget = np.ascontiguousarray(self.power_budget, dtype=np.float64)
        self.sessions = tuple(self.sessions)
        if self.gains.shape != (q, n, n):
            raise ValueError(f"gains must have shape {(q, n, n)}, got {self.gains.shape}")
        if self.noise.shape != (q, n):
            raise ValueError(f"noise must have shape {(q, n)}, got {self.noise.shape}")
        if self.power_budget.shape != (n,):
            raise ValueError(f"power_budget must have shape {(n,)}")
        if np.any(self.gains < 0):
            raise ValueError("gains must be nonnegative")
        if np.any(self.noise <= 0):
            raise ValueError("noise must be positive")
        if np.any(self.power_budget <= 0):
            raise ValueError("power budgets must be positive")
        if not g.connected():
            raise ValueError("scenario graph must be connected")
        report = check_allocation(g, self.allocation)
        if not report.ok:
            raise ValueError(f"allocation is not duplexing-feasible: {report}")
        for w, sess in enumerate(self.sessions):
            for label, node in (("origin", sess.origin), ("dest", sess.dest)):
                if node not in g._index:
                    raise ValueError(f"session {w} {label} {node!r} not in graph")

    @cached_property
    def layout(self) -> Layout:
        g = self.graph
        links = tuple(sorted(g.internal_links()))
        link_index = {lk: li for li, lk in enumerate(links)}
        ent_tx, ent_rx, ent_band, ent_link = [], [], [], []
        link_slices = []
        for li, (i, j) in enumerate(links):
            ext = (g.nodes[i], g.nodes[j])
            mask = self.allocation.link_bands[ext]
            start = len(ent_tx)
            for q in range(self.allocation.band_count):
                if mask >> q & 1:
                    ent_tx.append(i)
                    ent_rx.append(j)
                    ent_band.append(q)
                    ent_link.append(li)
            link_slices.append(slice(start, len(ent_tx)))
        out_links = tuple(
            tuple(li for li, (i, _) in enumerate(links) if i == v) for v in range(g.n)
        )
        node_band_entries = {}
        for e, (i, q) in enumerate(zip(ent_tx, ent_band)):
            node_band_entries.setdefault((i, q), []).append(e)
        node_band_entries = {k: np.array(v, dtype=np.int64) for k, v in node_band_entries.items()}
        rho_mask = np.zeros((g.n, self.allocation.band_count), dtype=bool)
        for node, oc in self.allocation.outgoing.items():
            i = g.index(node)
            for q in range(self.allocation.band_count):
                if oc >> q & 1:
                    rho_mask[i, q] = True
        origin = np.array([g.index(s.origin) for s in self.sessions], dtype=np.int64)
        dest = np.array([g.index(s.dest) for s in self.sessions], dtype=np.int64)
        return Layout(
            links=links,
            link_index=link_index,
            ent_tx=np.array(ent_tx, dtype=np.int64),
            ent_rx=np.array(ent_rx, dtype=np.int64),
            ent_band=np.array(ent_band, dtype=np.int64),
            ent_link=np.array(ent_link, dtype=np.int64),
            link_slices=tuple(link_slices),
            out_links=out_links,
            node_band_entries=node_band_entries,
            rho_mask=rho_mask,
            origin=origin,
            dest=dest,
        )


@dataclass
class ControlState:
    """All optimizer-controlled variables, as dense arrays.

    rho[i, q]: node i's power fraction on band q (support inside its
    outgoing band set, sums to at most 1 per node).  eta[e]: entry e's
    share of its (node, band) power (sums to 1 over each node-band group).
    phi[w, l]: session w's routing fraction on link l (sums to 1 over the
    outgoing links of every non-destination node).  phi_w[w]: rejected
    fraction of session w's demand.  mu[e]: entry e's share of its link's
    flow (sums to 1 over each link's entries).
    """

    rho: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    phi_w: np.ndarray
    mu: np.ndarray

    def copy(self) -> "ControlState":
        return ControlState(
            rho=self.rho.copy(),
            eta=self.eta.copy(),
            phi=self.phi.copy(),
            phi_w=self.phi_w.copy(),
            mu=self.mu.copy(),
        )


def uniform_state(scenario: NetworkScenario, power: float = 1.0, overflow: float = 0.0) -> ControlState:
    """Even splits everywhere; routing follows shortest-hop DAGs.

    Each node spends `power` of its budget split evenly across its bands,
    every node-band group splits evenly across its entries, every link
    splits its flow evenly across its bands, and each session rejects the
    `overflow` fraction and splits the rest evenly across outgoing links
    that strictly reduce hop distance to the destination.
    """
    if not 0 <= power <= 1 or not 0 <= overflow <= 1:
        raise ValueError("power and overflow must lie in [0, 1]")
    lay = scenario.layout
    g = scenario.graph
    rho = np.zeros((lay.n, lay.band_count))
    for i in range(lay.n):
        bands = np.flatnonzero(lay.rho_mask[i])
        if bands.size:
            rho[i, bands] = power / bands.size
    eta = np.zeros(lay.n_entries)
    for entries in lay.node_band_entries.values():
        eta[entries] = 1.0 / entries.size
    mu = np.zeros(lay.n_entries)
    for sl in lay.link_slices:
        width = sl.stop - sl.start
        if width:
            mu[sl] = 1.0 / width
    phi = np.zeros((len(scenario.sessions), lay.n_links))
    for w in range(len(scenario.sessions)):
        d = int(lay.dest[w])
        dist = _hop_distances(g, d)
        for i in range(lay.n):
            if i == d:
                continue
            # BFS layering guarantees a hop-decreasing neighbor on connected graphs
            forward = [li for li in lay.out_links[i] if dist[lay.links[li][1]] < dist[i]]
            if not forward:
                raise ValueError(f"node {g.nodes[i]} has no hop-decreasing link")
            for li in forward:
                phi[w, li] = 1.0 / len(forward)
    phi_w = np.full(len(scenario.sessions), float(overflow))
    return ControlState(rho=rho, eta=eta, phi=phi, phi_w=phi_w, mu=mu)


def _hop_distances(g: ConnectivityGraph, dest: int):
    dist = [math.inf] * g.n
    dist[dest] = 0
    frontier = [dest]
    while frontier:
        nxt = []
        for v in frontier:
            for u in g.adjacency(v):
                if dist[u] == math.inf:
                    dist[u] = dist[v] + 1
                    nxt.append(u)
        frontier = nxt
    return dist


def validate_state(scenario: NetworkScenario, state: ControlState, atol: float = 1e-9) -> list:
    """Constraint violations as human-readable strings; empty means valid."""
    lay = scenario.layout
    g = scenario.graph
    bad = []
    if state.rho.shape != (lay.n, lay.band_count):
        return [f"rho shape {state.rho.shape} != {(lay.n, lay.band_count)}"]
    if state.eta.shape != (lay.n_entries,) or state.mu.shape != (lay.n_entries,):
        return ["eta/mu shape mismatch"]
    if state.phi.shape != (len(scenario.sessions), lay.n_links):
        return [f"phi shape {state.phi.shape} != {(len(scenario.sessions), lay.n_links)}"]
    off = ~lay.rho_mask & (np.abs(state.rho) > atol)
    for i, q in zip(*np.nonzero(off)):
        bad.append(f"rho[{g.nodes[i]}, band {q}] nonzero outside the band set")
    if np.any(state.rho < -atol):
        bad.append("negative rho entry")
    for i in range(lay.n):
        tot = float(state.rho[i].sum())
        if tot > 1 + atol:
            bad.append(f"node {g.nodes[i]} power fractions sum to {tot:.6g} > 1")
    for (i, q), entries in sorted(lay.node_band_entries.items()):
        tot = float(state.eta[entries].sum())
        if abs(tot - 1) > atol * max(10, entries.size):
            bad.append(f"eta over node {g.nodes[i]} band {q} sums to {tot:.6g} != 1")
    if np.any(state.eta < -atol):
        bad.append("negative eta entry")
    for li, sl in enumerate(lay.link_slices):
        tot = float(state.mu[sl].sum())
        if abs(tot - 1) > atol * 10:
            i, j = lay.links[li]
            bad.append(f"mu over link ({g.nodes[i]}, {g.nodes[j]}) sums to {tot:.6g} != 1")
    if np.any(state.mu < -atol):
        bad.append("negative mu entry")
    if np.any(state.phi < -atol):
        bad.append("negative phi entry")
    if np.any((state.phi_w < -atol) | (state.phi_w > 1 + atol)):
        bad.append("phi_w outside [0, 1]")
    for w in range(len(scenario.sessions)):
        d = int(lay.dest[w])
        for i in range(lay.n):
            row = [state.phi[w, li] for li in lay.out_links[i]]
            tot = float(sum(row))
            if i == d:
                if tot > atol:
                    bad.append(f"session {w} routes out of its destination")
            elif abs(tot - 1) > atol * 10:
                bad.append(f"session {w} fractions at node {g.nodes[i]} sum to {tot:.6g} != 1")
        try:
            _session_topo_order(lay, state.phi[w], d, w)
        except CycleDetectedError as exc:
            bad.append(str(exc))
    return bad


@dataclass(frozen=True)
class PhysicalTerms:
    node_band_power: np.ndarray
    power: np.ndarray
    interference: np.ndarray
    sinr: np.ndarray


@dataclass(frozen=True)
class FlowTerms:
    inflow: np.ndarray
    session_flow: np.ndarray
    link_flow: np.ndarray
    band_flow: np.ndarray
    overflow: np.ndarray


@dataclass(frozen=True)
class DerivedState:
    physical: PhysicalTerms
    flows: FlowTerms
    link_cost: np.ndarray
    overflow_cost: np.ndarray
    total: float


def evaluate_physical(scenario: NetworkScenario, state: ControlState) -> PhysicalTerms:
    lay = scenario.layout
    npow, power, interference, sinr = kernels.physical_terms(
        scenario.gains,
        scenario.noise,
        scenario.power_budget,
        np.ascontiguousarray(state.rho),
        lay.ent_tx,
        lay.ent_rx,
        lay.ent_band,
        np.ascontiguousarray(state.eta),
    )
    return PhysicalTerms(node_band_power=npow, power=power, interference=interference, sinr=sinr)


def _session_topo_order(lay: Layout, phi_row: np.ndarray, dest: int, session: int):
    """Topological order of nodes under positive fractions, or a cycle error."""
    n = lay.n
    adj = [[] for _ in range(n)]
    indeg = [0] * n
    for li, (i, j) in enumerate(lay.links):
        if i != dest and phi_row[li] > 0:
            adj[i].append((j, li))
            indeg[j] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    order = []
    while stack:
        v = stack.pop()
        order.append(v)
        for u, _ in adj[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                stack.append(u)
    if len(order) < n:
        leftover = [v for v in range(n) if indeg[v] > 0]
        raise CycleDetectedError(session, leftover)
    return order, adj


def evaluate_flows(scenario: NetworkScenario, state: ControlState) -> FlowTerms:
    lay = scenario.layout
    n_sessions = len(scenario.sessions)
    inflow = np.zeros((n_sessions, lay.n))
    session_flow = np.zeros((n_sessions, lay.n_links))
    overflow = np.empty(n_sessions)
    for w, sess in enumerate(scenario.sessions):
        d = int(lay.dest[w])
        order, adj = _session_topo_order(lay, state.phi[w], d, w)
        t = np.zeros(lay.n)
        t[lay.origin[w]] = sess.demand * (1.0 - state.phi_w[w])
        for v in order:
            ti = t[v]
            if ti == 0.0:
                continue
            for u, li in adj[v]:
                f = ti * state.phi[w, li]
                session_flow[w, li] += f
                t[u] += f
        inflow[w] = t
        overflow[w] = sess.demand * state.phi_w[w]
    link_flow = session_flow.sum(axis=0)
    band_flow = state.mu * link_flow[lay.ent_link]
    return FlowTerms(
        inflow=inflow,
        session_flow=session_flow,
        link_flow=link_flow,
        band_flow=band_flow,
        overflow=overflow,
    )


def derive(scenario: NetworkScenario, state: ControlState) -> DerivedState:
    phys = evaluate_physical(scenario, state)
    flows = evaluate_flows(scenario, state)
    link_cost, link_total = kernels.link_cost_terms(
        phys.sinr, flows.band_flow, scenario.cost.bandwidth, scenario.cost.gain_factor
    )
    over = np.array(
        [
            sess.utility.overflow_cost(flows.overflow[w], sess.demand)
            for w, sess in enumerate(scenario.sessions)
        ]
    )
    return DerivedState(
        physical=phys,
        flows=flows,
        link_cost=link_cost,
        overflow_cost=over,
        total=float(link_total + over.sum()),
    )


def total_cost(scenario: NetworkScenario, state: ControlState) -> float:
    return derive(scenario, state).total


@dataclass(frozen=True)
class CostDerivatives:
    d_x: float
    d_f: float
    d_xx: float
    d_ff: float
    d_xf: float


def cost_derivatives(sinr: float, flow: float, cost: CostParams) -> CostDerivatives:
    """First and second derivatives of F/(C(x) - F) at an interior point.

    Requires sinr > 0, flow >= 0, and positive slack C - F > 0 with C > 0;
    anything else raises OutOfDomainError.
    """
    if sinr <= 0:
        raise OutOfDomainError(f"sinr {sinr} <= 0")
    if flow < 0:
        raise OutOfDomainError(f"flow {flow} < 0")
    cap = cost.bandwidth * math.log(cost.gain_factor * sinr)
    if cap <= 0:
        raise OutOfDomainError(f"capacity {cap} <= 0")
    if flow >= cap:
        raise OutOfDomainError(f"flow {flow} >= capacity {cap}")
    slack = cap - flow
    r = cost.bandwidth
    d_x = -flow * r / (sinr * slack * slack)
    d_f = cap / (slack * slack)
    d_xx = flow * r / (sinr * sinr) * (1.0 / (slack * slack) + 2.0 * r / (slack**3))
    d_ff = 2.0 * cap / (slack**3)
    d_xf = -(r / sinr) * (cap + flow) / (slack**3)
    return CostDerivatives(d_x=d_x, d_f=d_f, d_xx=d_xx, d_ff=d_ff, d_xf=d_xf)


@dataclass(frozen=True)
class MPsdReport:
    psd: bool
    min_eigenvalue: float
    at_sinr: float
    at_flow: float
    points: int
    tol: float

    def __str__(self):
        verdict = "PSD" if self.psd else "NOT PSD"
        return (
            f"{verdict}: min eigenvalue {self.min_eigenvalue:.6g} at "
            f"sinr={self.at_sinr:.6g}, flow={self.at_flow:.6g} over {self.points} points"
        )


def check_m_psd(
    cost: CostParams = None,
    derivs=None,
    grid: int = 50,
    capacity_span=(0.25, 8.0),
    flow_fraction_max: float = 0.95,
    tol: float = 1e-10,
) -> MPsdReport:
    """Scan the curvature matrix of the link cost over its finite domain.

    The matrix pairs the log-SINR direction with the flow direction:

        [[d_xx * x^2 + d_x * x,  d_xf * x],
         [d_xf * x,              d_ff    ]]

    Positive semidefiniteness of this matrix everywhere is what a
    convexity-based convergence argument would need.  `derivs(x, f)` may
    supply the five derivatives for an alternative cost family; by default
    the grid covers capacities in `capacity_span` (units of bandwidth) and
    flows up to `flow_fraction_max` of capacity.
    """
    if cost is None:
        cost = CostParams()
    if derivs is None:
        def derivs(x, f, _cost=cost):
            d = cost_derivatives(x, f, _cost)
            return d.d_x, d.d_f, d.d_xx, d.d_ff, d.d_xf

    r = cost.bandwidth
    caps = np.linspace(capacity_span[0] * r, capacity_span[1] * r, grid)
    fracs = np.linspace(0.0, flow_fraction_max, grid)
    best = math.inf
    best_at = (math.nan, math.nan)
    count = 0
    for cap in caps:
        x = math.exp(cap / r) / cost.gain_factor
        for frac in fracs:
            f = frac * cap
            d_x, _, d_xx, d_ff, d_xf = derivs(x, f)
            a = d_xx * x * x + d_x * x
            b = d_xf * x
            c = d_ff
            half_gap = math.hypot((a - c) / 2.0, b)
            lo = (a + c) / 2.0 - half_gap
            count += 1
            if lo < best:
                best = lo
                best_at = (x, f)
    return MPsdReport(
        psd=best >= -tol,
        min_eigenvalue=best,
        at_sinr=best_at[0],
        at_flow=best_at[1],
        points=count,
        tol=tol,
    )
