"""Independent checks for the analytic gradients and the solver.

``finite_diff_check`` differentiates the total cost numerically with
central differences and compares against every analytic block gradient.
It refuses to run when the state is too close to a cost barrier for the
differences to be trustworthy, and it skips coordinates lying within a
margin of a constraint boundary (one-sided conventions apply there).

``reference_solve_small`` minimizes the same objective with none of the
package's analytic machinery: it parameterizes by raw per-entry transmit
powers, per-session simple-path flows, and per-link band shares, evaluates
SINR through its own kernel written in a different algebraic arrangement,
and runs a derivative-free cyclic coordinate search: each scalar
coordinate (one power, one path flow, or a pairwise transfer inside a
budget/simplex group) is minimized by a grid scan plus golden-section
refinement on raw cost values, restarted from several random interior
points.  Deliberately brute force and only for tiny instances; its value
is having no formula in common with :mod:`duplexnet.gradients` or
:mod:`duplexnet.optimizer` beyond the problem statement itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coloring import TooLargeError
from .scenario import ControlState, NetworkScenario, derive, total_cost
from . import gradients as _gradients

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


class BoundaryTooCloseError(RuntimeError):
    """State too close to a cost barrier for finite differences."""


@dataclass(frozen=True)
class FamilyReport:
    max_rel_err: float
    checked: int
    skipped: int


@dataclass(frozen=True)
class CheckReport:
    families: dict
    h: float

    @property
    def worst(self) -> float:
        errs = [f.max_rel_err for f in self.families.values() if f.checked]
        return max(errs) if errs else 0.0

    @property
    def total_checked(self) -> int:
        return sum(f.checked for f in self.families.values())


def _require_headroom(scenario, derived, headroom):
    x = derived.physical.sinr
    f = derived.flows.band_flow
    r = scenario.cost.bandwidth
    k = scenario.cost.gain_factor
    for e in range(f.shape[0]):
        if f[e] <= 0:
            continue
        if x[e] <= 0:
            raise BoundaryTooCloseError(f"entry {e} carries flow with no sinr")
        cap = r * math.log(k * x[e])
        if not f[e] <= (1.0 - headroom) * cap:
            raise BoundaryTooCloseError(
                f"entry {e}: flow {f[e]:.6g} within {headroom:.0%} of capacity {cap:.6g}"
            )


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-4)


def finite_diff_check(
    scenario: NetworkScenario,
    state: ControlState,
    h: float = 1e-6,
    margin: float = 1e-4,
    headroom: float = 0.05,
) -> CheckReport:
    """Compare every analytic partial derivative with central differences.

    Coordinates closer than `margin` to zero are skipped (their analytic
    values are one-sided conventions); the whole check raises
    BoundaryTooCloseError when any loaded entry sits within `headroom`
    of its capacity, since differences would straddle the barrier.
    """
    derived = derive(scenario, state)
    if not math.isfinite(derived.total):
        raise ValueError("finite differences need a finite-cost state")
    _require_headroom(scenario, derived, headroom)
    bundle = _gradients.gradient_bundle(scenario, state, derived)
    lay = scenario.layout
    families = {}

    def central(setter, value):
        s1 = state.copy()
        setter(s1, value + h)
        s2 = state.copy()
        setter(s2, value - h)
        return (total_cost(scenario, s1) - total_cost(scenario, s2)) / (2.0 * h)

    worst = 0.0
    checked = skipped = 0
    for i in range(lay.n):
        for q in np.flatnonzero(lay.rho_mask[i]):
            v = state.rho[i, q]
            if v < margin:
                skipped += 1
                continue
            fd = central(lambda s, val, i=i, q=q: s.rho.__setitem__((i, q), val), v)
            worst = max(worst, _rel_err(fd, bundle.rho_grad[i, q]))
            checked += 1
    families["rho"] = FamilyReport(worst, checked, skipped)

    worst = 0.0
    checked = skipped = 0
    for e in range(lay.n_entries):
        v = state.eta[e]
        if v < margin:
            skipped += 1
            continue
        fd = central(lambda s, val, e=e: s.eta.__setitem__(e, val), v)
        worst = max(worst, _rel_err(fd, bundle.eta_grad[e]))
        checked += 1
    families["eta"] = FamilyReport(worst, checked, skipped)

    worst = 0.0
    checked = skipped = 0
    for e in range(lay.n_entries):
        v = state.mu[e]
        if v < margin:
            skipped += 1
            continue
        fd = central(lambda s, val, e=e: s.mu.__setitem__(e, val), v)
        worst = max(worst, _rel_err(fd, bundle.mu_grad[e]))
        checked += 1
    families["mu"] = FamilyReport(worst, checked, skipped)

    worst = 0.0
    checked = skipped = 0
    inflow = derived.flows.inflow
    for w in range(len(scenario.sessions)):
        d = int(lay.dest[w])
        for li in range(lay.n_links):
            i = lay.links[li][0]
            if i == d:
                continue
            v = state.phi[w, li]
            if v < margin:
                skipped += 1
                continue
            fd = central(lambda s, val, w=w, li=li: s.phi.__setitem__((w, li), val), v)
            # no inflow means the partial is exactly zero even when the
            # downstream marginal is infinite (blocked link, 0 * inf)
            if inflow[w, i] == 0.0:
                analytic = 0.0
            else:
                analytic = inflow[w, i] * bundle.routing.delta_phi[w, li]
            worst = max(worst, _rel_err(fd, analytic))
            checked += 1
    families["phi"] = FamilyReport(worst, checked, skipped)

    worst = 0.0
    checked = skipped = 0
    for w in range(len(scenario.sessions)):
        v = state.phi_w[w]
        if v < margin or v > 1.0 - margin:
            skipped += 1
            continue
        fd = central(lambda s, val, w=w: s.phi_w.__setitem__(w, val), v)
        worst = max(worst, _rel_err(fd, bundle.routing.overflow_grad[w]))
        checked += 1
    families["phi_w"] = FamilyReport(worst, checked, skipped)
    return CheckReport(families=families, h=h)


# ---------------------------------------------------------------------------
# reference solver


def _oracle_cost_loops(gains, noise, ent_tx, ent_rx, ent_band, p, band_flow, bandwidth, gain_factor):
    n = noise.shape[1]
    nq = noise.shape[0]
    ne = p.shape[0]
    npow = np.zeros((n, nq))
    for e in range(ne):
        npow[ent_tx[e], ent_band[e]] += p[e]
    total = 0.0
    for e in range(ne):
        f = band_flow[e]
        if f == 0.0:
            continue
        j = ent_rx[e]
        q = ent_band[e]
        g = gains[q, ent_tx[e], j]
        rx_total = 0.0
        for m in range(n):
            rx_total += gains[q, m, j] * npow[m, q]
        inn = rx_total - g * p[e] + noise[q, j]
        sig = g * p[e]
        if sig <= 0.0:
            return math.inf
        cap = bandwidth * math.log(gain_factor * sig / inn)
        if cap <= 0.0 or f >= cap:
            return math.inf
        total += f / (cap - f)
    return total


def _oracle_sinr_loops(gains, noise, ent_tx, ent_rx, ent_band, p):
    n = noise.shape[1]
    nq = noise.shape[0]
    ne = p.shape[0]
    npow = np.zeros((n, nq))
    for e in range(ne):
        npow[ent_tx[e], ent_band[e]] += p[e]
    out = np.empty(ne)
    for e in range(ne):
        j = ent_rx[e]
        q = ent_band[e]
        g = gains[q, ent_tx[e], j]
        rx_total = 0.0
        for m in range(n):
            rx_total += gains[q, m, j] * npow[m, q]
        inn = rx_total - g * p[e] + noise[q, j]
        sig = g * p[e]
        # -1 marks "no usable signal"; callers map it to a -inf capacity
        out[e] = sig / inn if (sig > 0.0 and inn > 0.0) else -1.0
    return out


if _HAVE_NUMBA:
    _oracle_cost = numba.njit(cache=True)(_oracle_cost_loops)
    _oracle_sinr = numba.njit(cache=True)(_oracle_sinr_loops)
else:  # pragma: no cover
    _oracle_cost = _oracle_cost_loops
    _oracle_sinr = _oracle_sinr_loops


def _simple_paths(lay, origin, dest, cap=64):
    """All simple origin->dest paths as tuples of link indices."""
    out = []
    path = []
    seen = {origin}

    def walk(v):
        if v == dest:
            out.append(tuple(path))
            if len(out) > cap:
                raise TooLargeError(f"more than {cap} simple paths")
            return
        for li in lay.out_links[v]:
            u = lay.links[li][1]
            if u not in seen:
                seen.add(u)
                path.append(li)
                walk(u)
                path.pop()
                seen.remove(u)

    walk(origin)
    return out


def _project_budget(p, budget):
    """Project onto {p >= 0, sum p <= budget} (euclidean)."""
    q = np.maximum(0.0, p)
    total = q.sum()
    if total <= budget:
        return q
    lo, hi = 0.0, float(np.max(q))
    for _ in range(100):
        lam = 0.5 * (lo + hi)
        s = np.maximum(0.0, q - lam).sum()
        if s > budget:
            lo = lam
        else:
            hi = lam
    return np.maximum(0.0, q - hi)


def _project_simplex(v):
    """Project onto {v >= 0, sum v = 1} (euclidean)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho_idx = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0][-1]
    theta = (css[rho_idx] - 1.0) / (rho_idx + 1.0)
    return np.maximum(0.0, v - theta)


def _subset_cost(cap, flow):
    """Sum of f/(cap - f) over loaded entries, inf when any is at capacity.

    cap must already be -inf wherever the entry has no usable signal, so a
    single comparison covers the whole barrier precedence: an unloaded
    entry is free, a loaded one needs 0 < f < cap.
    """
    loaded = flow > 0.0
    if not loaded.any():
        return 0.0
    f = flow[loaded]
    c = cap[loaded]
    if np.any(c <= f):
        return math.inf
    return float(np.sum(f / (c - f)))


def _one_cost(cap, f):
    if f <= 0.0:
        return 0.0
    if cap <= f:
        return math.inf
    return f / (cap - f)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _line_min(fun, lo, hi, cur, f_cur, grid=9, refine=36):
    """Minimize fun on [lo, hi] given the known point (cur, f_cur).

    Coarse grid scan picks a bracket, golden-section refines it.  The best
    point ever evaluated is tracked, so a non-unimodal section can only
    cost accuracy, never return something worse than the starting point.
    Returns (best_x, best_f, evaluations).
    """
    if not hi - lo > 0.0:
        return cur, f_cur, 0
    points = [(float(cur), f_cur)]
    evals = 0
    for x in np.linspace(lo, hi, grid):
        x = float(x)
        if x == cur:
            continue
        points.append((x, fun(x)))
        evals += 1
    points.sort(key=lambda t: t[0])
    b = min(range(len(points)), key=lambda k: points[k][1])
    best_x, best_f = points[b]
    a = points[b - 1][0] if b > 0 else points[0][0]
    z = points[b + 1][0] if b + 1 < len(points) else points[-1][0]
    if not z - a > 0.0:
        return best_x, best_f, evals
    c = z - _INVPHI * (z - a)
    d = a + _INVPHI * (z - a)
    fc = fun(c)
    fd = fun(d)
    evals += 2
    if fc < best_f:
        best_x, best_f = c, fc
    if fd < best_f:
        best_x, best_f = d, fd
    for _ in range(refine):
        if fc <= fd:
            z, d, fd = d, c, fc
            c = z - _INVPHI * (z - a)
            fc = fun(c)
            if fc < best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (z - a)
            fd = fun(d)
            if fd < best_f:
                best_x, best_f = d, fd
        evals += 1
        if z - a <= 1e-14 * max(1.0, abs(a), abs(z)):
            break
    return best_x, best_f, evals


@dataclass
class _OracleProblem:
    scenario: NetworkScenario
    paths: list
    n_power: int
    n_flow: int
    n_share: int

    def split(self, vec):
        a = self.n_power
        b = a + self.n_flow
        return vec[:a], vec[a:b], vec[b:]

    def evaluate(self, vec) -> float:
        scen = self.scenario
        lay = scen.layout
        p, flows, shares = self.split(vec)
        link_flow = np.zeros(lay.n_links)
        pos = 0
        over_total = 0.0
        for w, sess in enumerate(scen.sessions):
            ps = self.paths[w]
            f = flows[pos : pos + len(ps)]
            pos += len(ps)
            routed = float(f.sum())
            rejected = sess.demand - routed
            if rejected < -1e-12:
                return math.inf
            for k, path in enumerate(ps):
                for li in path:
                    link_flow[li] += f[k]
            over_total += sess.utility.overflow_cost(max(0.0, rejected), sess.demand)
        band_flow = shares * link_flow[lay.ent_link]
        link_total = _oracle_cost(
            scen.gains,
            scen.noise,
            lay.ent_tx,
            lay.ent_rx,
            lay.ent_band,
            p,
            band_flow,
            scen.cost.bandwidth,
            scen.cost.gain_factor,
        )
        return float(link_total + over_total)

    def project(self, vec):
        scen = self.scenario
        lay = scen.layout
        p, flows, shares = self.split(vec)
        p = p.copy()
        for i in range(lay.n):
            idx = np.nonzero(lay.ent_tx == i)[0]
            if idx.size:
                p[idx] = _project_budget(p[idx], scen.power_budget[i])
        flows = flows.copy()
        pos = 0
        for w, sess in enumerate(scen.sessions):
            k = len(self.paths[w])
            seg = flows[pos : pos + k]
            flows[pos : pos + k] = _project_budget(seg, sess.demand)
            pos += k
        shares = shares.copy()
        for sl in lay.link_slices:
            if sl.stop - sl.start == 1:
                shares[sl.start] = 1.0
            elif sl.stop > sl.start:
                shares[sl.start : sl.stop] = _project_simplex(shares[sl.start : sl.stop])
        return np.concatenate([p, flows, shares])


@dataclass(frozen=True)
class OracleResult:
    cost: float
    state: ControlState
    restart_costs: tuple
    evaluations: int


def _to_control_state(problem: _OracleProblem, vec) -> ControlState:
    scen = problem.scenario
    lay = scen.layout
    p, flows, shares = problem.split(vec)
    rho = np.zeros((lay.n, lay.band_count))
    eta = np.zeros(lay.n_entries)
    for (i, q), entries in lay.node_band_entries.items():
        group = p[entries]
        tot = float(group.sum())
        rho[i, q] = tot / scen.power_budget[i]
        eta[entries] = group / tot if tot > 0 else 1.0 / entries.size
    mu = shares.copy()
    phi = np.zeros((len(scen.sessions), lay.n_links))
    phi_w = np.zeros(len(scen.sessions))
    pos = 0
    for w, sess in enumerate(scen.sessions):
        ps = problem.paths[w]
        f = flows[pos : pos + len(ps)]
        pos += len(ps)
        routed = float(f.sum())
        phi_w[w] = max(0.0, min(1.0, 1.0 - routed / sess.demand))
        outflow = np.zeros(lay.n_links)
        for k, path in enumerate(ps):
            for li in path:
                outflow[li] += f[k]
        d = int(lay.dest[w])
        dist = _hop_dist(scen.graph, d)
        for i in range(lay.n):
            if i == d:
                continue
            idx = list(lay.out_links[i])
            loads = outflow[idx]
            tot = loads.sum()
            if tot > 0:
                phi[w, idx] = loads / tot
            else:
                forward = [li for li in idx if dist[lay.links[li][1]] < dist[i]]
                for li in forward:
                    phi[w, li] = 1.0 / len(forward)
    return ControlState(rho=rho, eta=eta, phi=phi, phi_w=phi_w, mu=mu)


def _hop_dist(g, dest):
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


@dataclass(frozen=True)
class _Coord:
    kind: str  # "p" power, "f" path flow, "pt"/"ft"/"st" pairwise transfers
    a: int
    b: int = -1
    session: int = -1


def _ring_pairs(kind, idx, session=-1):
    """Consecutive transfer pairs covering a group; a closing pair for k > 2.

    Transfers along consecutive pairs span the whole tangent space of the
    group's sum constraint, which is what lets single-coordinate moves keep
    improving when the group total is pinned.
    """
    k = len(idx)
    if k < 2:
        return []
    out = [_Coord(kind, int(idx[t]), int(idx[t + 1]), session) for t in range(k - 1)]
    if k > 2:
        out.append(_Coord(kind, int(idx[-1]), int(idx[0]), session))
    return out


class _Search:
    """Cyclic coordinate search over the oracle parameterization.

    Each coordinate is a 1-D section of the cost: one entry power, one
    path flow, or a pairwise transfer inside a budget/simplex group (power
    within a node, flow within a session, shares within a link).  Sections
    are minimized on raw cost values only, no gradients anywhere.  Every
    candidate move is re-priced with the full independent evaluation before
    being accepted, so the incremental bookkeeping can only ever miss an
    improvement, never accept a spurious one.
    """

    def __init__(self, problem: _OracleProblem, vec, cost):
        self.problem = problem
        self.vec = vec
        self.cost = float(cost)
        self.evals = 0
        scen = problem.scenario
        lay = scen.layout
        self._r = scen.cost.bandwidth
        self._k = scen.cost.gain_factor
        self.node_entries = {
            i: np.flatnonzero(lay.ent_tx == i)
            for i in range(lay.n)
            if np.any(lay.ent_tx == i)
        }
        self.flow_session = np.empty(problem.n_flow, dtype=np.int64)
        self.flow_inc = np.zeros((problem.n_flow, lay.n_links))
        self.flow_entries = []
        pos = 0
        for w, ps in enumerate(problem.paths):
            for path in ps:
                self.flow_session[pos] = w
                for li in path:
                    self.flow_inc[pos, li] = 1.0
                on_path = np.isin(lay.ent_link, np.asarray(path, dtype=np.int64))
                self.flow_entries.append(np.flatnonzero(on_path))
                pos += 1
        self.coords = self._build_coords()
        self.refresh()

    def _build_coords(self):
        lay = self.problem.scenario.layout
        coords = [_Coord("p", e) for e in range(lay.n_entries)]
        for idx in self.node_entries.values():
            coords.extend(_ring_pairs("pt", idx))
        pos = 0
        for w, ps in enumerate(self.problem.paths):
            k = len(ps)
            coords.extend(_Coord("f", pos + t, session=w) for t in range(k))
            coords.extend(_ring_pairs("ft", range(pos, pos + k), session=w))
            pos += k
        for sl in lay.link_slices:
            if sl.stop - sl.start >= 2:
                coords.extend(_ring_pairs("st", range(sl.start, sl.stop)))
        return coords

    def refresh(self):
        """Rebuild the cached pieces the fast 1-D sections read from."""
        prob = self.problem
        scen = prob.scenario
        lay = scen.layout
        self.p, self.flows, self.shares = prob.split(self.vec)
        self.link_flow = self.flows @ self.flow_inc
        self.band_flow = self.shares * self.link_flow[lay.ent_link]
        sinr = _oracle_sinr(scen.gains, scen.noise, lay.ent_tx, lay.ent_rx, lay.ent_band, self.p)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = self._r * np.log(self._k * np.maximum(sinr, 1e-300))
        self.cap = np.where(sinr > 0.0, raw, -math.inf)
        self.routed = np.zeros(len(scen.sessions))
        np.add.at(self.routed, self.flow_session, self.flows)
        self.over = np.array(
            [
                s.utility.overflow_cost(max(0.0, s.demand - self.routed[w]), s.demand)
                for w, s in enumerate(scen.sessions)
            ]
        )
        self.over_total = float(self.over.sum())
        self.link_cost = _subset_cost(self.cap, self.band_flow)

    def _section(self, c):
        """Build (fun, lo, hi, cur) for one coordinate, or None to skip it."""
        scen = self.problem.scenario
        lay = scen.layout
        if c.kind in ("p", "pt"):
            p = self.p
            gains, noise = scen.gains, scen.noise
            etx, erx, ebd = lay.ent_tx, lay.ent_rx, lay.ent_band
            bf = self.band_flow
            r, k, ot = self._r, self._k, self.over_total
            if c.kind == "p":
                e = c.a
                node = int(etx[e])
                slack = float(scen.power_budget[node]) - float(p[self.node_entries[node]].sum())
                cur = float(p[e])
                hi = cur + max(0.0, slack)

                def fun(x):
                    old = p[e]
                    p[e] = x
                    tot = _oracle_cost(gains, noise, etx, erx, ebd, p, bf, r, k)
                    p[e] = old
                    return tot + ot

                return fun, 0.0, hi, cur
            a, b = c.a, c.b

            def fun(d):
                pa, pb = p[a], p[b]
                p[a] = max(0.0, pa + d)
                p[b] = max(0.0, pb - d)
                tot = _oracle_cost(gains, noise, etx, erx, ebd, p, bf, r, k)
                p[a] = pa
                p[b] = pb
                return tot + ot

            return fun, -float(self.p[a]), float(self.p[b]), 0.0
        if c.kind == "f":
            fi = c.a
            sess = scen.sessions[c.session]
            pe = self.flow_entries[fi]
            cap_pe = self.cap[pe]
            bf_pe = self.band_flow[pe]
            sh_pe = self.shares[pe]
            rest = self.link_cost - _subset_cost(cap_pe, bf_pe)
            over_rest = self.over_total - float(self.over[c.session])
            cur = float(self.flows[fi])
            routed_others = float(self.routed[c.session]) - cur
            hi = cur + max(0.0, sess.demand - float(self.routed[c.session]))
            util, demand = sess.utility, sess.demand

            def fun(x):
                f_sub = bf_pe + sh_pe * (x - cur)
                over_w = util.overflow_cost(max(0.0, demand - (routed_others + x)), demand)
                return rest + _subset_cost(cap_pe, f_sub) + over_rest + over_w

            return fun, 0.0, hi, cur
        if c.kind == "ft":
            a, b = c.a, c.b
            pe = np.union1d(self.flow_entries[a], self.flow_entries[b])
            inc_a = np.isin(pe, self.flow_entries[a]).astype(float)
            inc_b = np.isin(pe, self.flow_entries[b]).astype(float)
            dvec = self.shares[pe] * (inc_a - inc_b)
            cap_pe = self.cap[pe]
            bf_pe = self.band_flow[pe]
            base = self.over_total + self.link_cost - _subset_cost(cap_pe, bf_pe)

            def fun(d):
                return base + _subset_cost(cap_pe, bf_pe + d * dvec)

            return fun, -float(self.flows[a]), float(self.flows[b]), 0.0
        a, b = c.a, c.b
        lflow = float(self.link_flow[lay.ent_link[a]])
        if lflow <= 0.0:
            return None
        ca, cb = float(self.cap[a]), float(self.cap[b])
        fa0, fb0 = float(self.band_flow[a]), float(self.band_flow[b])
        base = self.link_cost - _one_cost(ca, fa0) - _one_cost(cb, fb0) + self.over_total

        def fun(d):
            return base + _one_cost(ca, fa0 + d * lflow) + _one_cost(cb, fb0 - d * lflow)

        return fun, -float(self.shares[a]), float(self.shares[b]), 0.0

    def _array_for(self, kind):
        if kind in ("p", "pt"):
            return self.p
        if kind in ("f", "ft"):
            return self.flows
        return self.shares

    def minimize_coord(self, c, grid=9, refine=36):
        built = self._section(c)
        if built is None:
            return False
        fun, lo, hi, cur = built
        best_x, best_f, ev = _line_min(fun, lo, hi, cur, self.cost, grid=grid, refine=refine)
        self.evals += ev
        if best_x == cur or not best_f < self.cost:
            return False
        arr = self._array_for(c.kind)
        if c.kind in ("p", "f"):
            olds = (float(arr[c.a]),)
            arr[c.a] = best_x
        else:
            olds = (float(arr[c.a]), float(arr[c.b]))
            arr[c.a] = max(0.0, olds[0] + best_x)
            arr[c.b] = max(0.0, olds[1] - best_x)
        new_cost = self.problem.evaluate(self.vec)
        self.evals += 1
        if new_cost < self.cost:
            self.cost = float(new_cost)
            self.refresh()
            return True
        arr[c.a] = olds[0]
        if len(olds) == 2:
            arr[c.b] = olds[1]
        return False

    def run(self, rng, sweeps, freeze_power, rel_tol=1e-12):
        coords = self.coords
        if freeze_power:
            coords = [c for c in coords if c.kind not in ("p", "pt")]
        if not coords:
            return
        stall = 0
        for _ in range(max(1, sweeps)):
            before = self.cost
            for ci in rng.permutation(len(coords)):
                self.minimize_coord(coords[ci])
            if before - self.cost <= rel_tol * max(1.0, abs(self.cost)):
                stall += 1
                if stall >= 2:
                    break
            else:
                stall = 0


def reference_solve_small(
    scenario: NetworkScenario,
    seed: int = 0,
    restarts: int = 5,
    sweeps: int = 60,
    freeze_power: bool = False,
    max_nodes: int = 4,
    max_sessions: int = 2,
    max_bands: int = 3,
) -> OracleResult:
    """Numeric-only coordinate search over tiny instances, best of restarts.

    Raises TooLargeError beyond max_nodes/max_sessions/max_bands; those
    caps keep the simple-path enumeration and the per-sweep work
    affordable.  freeze_power keeps transmit powers at their initial value
    so closed-form toy problems in flow variables can be checked in
    isolation.
    """
    lay = scenario.layout
    if lay.n > max_nodes:
        raise TooLargeError(f"{lay.n} nodes > {max_nodes}")
    if len(scenario.sessions) > max_sessions:
        raise TooLargeError(f"{len(scenario.sessions)} sessions > {max_sessions}")
    if lay.band_count > max_bands:
        raise TooLargeError(f"{lay.band_count} bands > {max_bands}")
    paths = [
        _simple_paths(lay, int(lay.origin[w]), int(lay.dest[w]))
        for w in range(len(scenario.sessions))
    ]
    if any(not ps for ps in paths):
        raise ValueError("a session has no path to its destination")
    n_flow = sum(len(ps) for ps in paths)
    problem = _OracleProblem(
        scenario=scenario,
        paths=paths,
        n_power=lay.n_entries,
        n_flow=n_flow,
        n_share=lay.n_entries,
    )
    rng = np.random.default_rng(seed)
    best_vec = None
    best_cost = math.inf
    restart_costs = []
    evals = 0
    for _ in range(max(1, restarts)):
        p0 = np.empty(lay.n_entries)
        for i in range(lay.n):
            idx = np.nonzero(lay.ent_tx == i)[0]
            if idx.size == 0:
                continue
            raw = rng.uniform(0.2, 1.0, idx.size)
            p0[idx] = scenario.power_budget[i] * rng.uniform(0.3, 0.95) * raw / raw.sum()
        f0 = np.concatenate(
            [
                np.full(len(ps), 0.3 * scenario.sessions[w].demand / max(1, len(ps)))
                * rng.uniform(0.5, 1.0, len(ps))
                for w, ps in enumerate(paths)
            ]
        )
        s0 = np.empty(lay.n_entries)
        for sl in lay.link_slices:
            raw = rng.uniform(0.5, 1.0, sl.stop - sl.start)
            s0[sl.start : sl.stop] = raw / raw.sum()
        vec = problem.project(np.concatenate([p0, f0, s0]))
        cost = problem.evaluate(vec)
        evals += 1
        shrinks = 0
        while not math.isfinite(cost) and shrinks < 10:
            # admitted flow too aggressive for the sampled powers; back off
            f0 = f0 * 0.2 if shrinks < 9 else np.zeros_like(f0)
            vec = problem.project(np.concatenate([p0, f0, s0]))
            cost = problem.evaluate(vec)
            evals += 1
            shrinks += 1
        search = _Search(problem, vec, cost)
        search.run(rng, sweeps, freeze_power)
        vec = search.vec
        cost = search.cost
        evals += search.evals
        restart_costs.append(cost)
        if best_vec is None or cost < best_cost:
            best_cost = cost
            best_vec = vec.copy()
    state = _to_control_state(problem, best_vec)
    return OracleResult(
        cost=best_cost,
        state=state,
        restart_costs=tuple(restart_costs),
        evaluations=evals,
    )
