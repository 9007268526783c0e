"""Block-coordinate scaled gradient projection over the control state.

The cost is minimized one constraint group at a time: each per-link band
split, each (node, band) power-share group, each node's power budget row,
each session's routing row at a node, and each session's overflow scalar
form separate blocks whose feasible sets are simplexes, capped simplexes,
or boxes.  A block update takes a diagonally scaled gradient step, projects
back onto the block's feasible set, and backtracks until the new cost
satisfies a sufficient-decrease test; total cost therefore never increases.

The diagonal scaling uses cheap second-derivative estimates of the link
cost (times a safety factor), with a floor so weights stay positive; the
backtracking line search makes convergence independent of estimate quality.
Stationarity is measured by :func:`optimality_residuals`: within every
active group the marginals of used coordinates must agree, unused
coordinates must not undercut them, and power rows must respect the sign
conventions of a budget inequality.  The residual is the worst violation
over all groups, zero exactly at a blockwise-stationary point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gradients import (
    delta_eta,
    delta_mu,
    delta_rho,
    routing_marginals,
)
from .scenario import ControlState, NetworkScenario, derive


class StalledStepError(RuntimeError):
    """A full sweep produced no progress while the residual stayed above tol."""

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"no block can make progress: residual {residual:.3g} above tolerance {tol:.3g}"
        )


def project_scaled(
    target,
    weights,
    constraint: str = "sum_to_one",
    lower: float = 0.0,
    upper: float = None,
    fixed=None,
    tol: float = 1e-12,
    max_iter: int = 200,
):
    """Project onto the block's feasible set in the weighted norm.

    Minimizes sum_k weights[k] * (z[k] - target[k])^2 subject to the
    constraint: "sum_to_one" (z >= 0, sum z = 1), "sum_at_most_one"
    (z >= 0, sum z <= 1), or "box" (lower <= z <= upper, uncoupled).
    Coordinates marked in `fixed` are pinned to zero and excluded.
    The coupled cases are solved by bisection on the shift multiplier;
    the returned point satisfies its sum constraint to within `tol`.
    """
    y = np.asarray(target, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("projection weights must be positive")
    if constraint == "box":
        hi = math.inf if upper is None else upper
        return np.clip(y, lower, hi)
    if constraint not in ("sum_to_one", "sum_at_most_one"):
        raise ValueError(f"unknown constraint {constraint!r}")
    z = np.zeros_like(y)
    free = np.ones(y.shape, dtype=bool) if fixed is None else ~np.asarray(fixed, dtype=bool)
    yf = y[free]
    wf = w[free]
    if yf.size == 0:
        if constraint == "sum_to_one":
            raise ValueError("cannot satisfy sum_to_one with all coordinates fixed")
        return z
    plain = np.maximum(0.0, yf)
    total = plain.sum()
    if constraint == "sum_at_most_one" and total <= 1.0:
        z[free] = plain
        return z
    if constraint == "sum_to_one" and abs(total - 1.0) <= tol and np.all(yf >= 0):
        z[free] = plain
        return z
    lo = float(np.min((yf - 1.0) * wf))
    hi = float(np.max(yf * wf))
    for _ in range(max_iter):
        lam = 0.5 * (lo + hi)
        s = np.maximum(0.0, yf - lam / wf).sum()
        if abs(s - 1.0) <= tol:
            break
        if s > 1.0:
            lo = lam
        else:
            hi = lam
    z[free] = np.maximum(0.0, yf - lam / wf)
    return z


@dataclass(frozen=True)
class ScalingPolicy:
    """Knobs for the per-block scaled step and line search."""

    safety: float = 2.0
    floor: float = 1e-6
    armijo: float = 1e-4
    shrink: float = 0.5
    max_halvings: int = 50
    grow: float = 2.0


@dataclass(frozen=True)
class EtaBlock:
    node: int
    band: int


@dataclass(frozen=True)
class RhoBlock:
    node: int


@dataclass(frozen=True)
class MuBlock:
    link: int


@dataclass(frozen=True)
class PhiBlock:
    session: int
    node: int


@dataclass(frozen=True)
class OverflowBlock:
    session: int


def blocks(scenario: NetworkScenario):
    """Every block of the sweep, in the canonical order."""
    lay = scenario.layout
    out = []
    for li in range(lay.n_links):
        sl = lay.link_slices[li]
        if sl.stop - sl.start > 1:
            out.append(MuBlock(li))
    for (i, q), entries in sorted(lay.node_band_entries.items()):
        if entries.size > 1:
            out.append(EtaBlock(i, q))
    for i in range(lay.n):
        if np.any(lay.rho_mask[i]):
            out.append(RhoBlock(i))
    for w in range(len(scenario.sessions)):
        d = int(lay.dest[w])
        for i in range(lay.n):
            if i != d and len(lay.out_links[i]) > 1:
                out.append(PhiBlock(w, i))
        out.append(OverflowBlock(w))
    return out


def _entry_second(scenario, derived):
    """Per-entry (d_xx, d_ff) curvature estimates, zero where undefined."""
    x = derived.physical.sinr
    f = derived.flows.band_flow
    r = scenario.cost.bandwidth
    k = scenario.cost.gain_factor
    d_xx = np.zeros_like(x)
    d_ff = np.zeros_like(x)
    powered = x > 0
    cap = np.full_like(x, -math.inf)
    cap[powered] = r * np.log(k * x[powered])
    ok = powered & (cap > 0) & (f < cap)
    slack = cap[ok] - f[ok]
    d_ff[ok] = 2.0 * cap[ok] / slack**3
    loaded = ok & (f > 0)
    sl = cap[loaded] - f[loaded]
    d_xx[loaded] = f[loaded] * r / x[loaded] ** 2 * (1.0 / sl**2 + 2.0 * r / sl**3)
    return d_xx, d_ff


def _block_move(scenario, state, block, derived, policy):
    """Gradient, weights, current coords, and write-back info for a block."""
    lay = scenario.layout
    d_xx, d_ff = _entry_second(scenario, derived)
    if isinstance(block, MuBlock):
        sl = lay.link_slices[block.link]
        idx = np.arange(sl.start, sl.stop)
        grad = delta_mu(scenario, state, derived)[idx]
        flow = derived.flows.link_flow[block.link]
        curv = d_ff[idx] * flow * flow
        return state.mu[idx], grad, curv, "sum_to_one", None, ("mu", idx)
    if isinstance(block, EtaBlock):
        idx = lay.node_band_entries[(block.node, block.band)]
        _, grad_all = delta_eta(scenario, state, derived)
        g = scenario.gains[lay.ent_band[idx], lay.ent_tx[idx], lay.ent_rx[idx]]
        npow = derived.physical.node_band_power[block.node, block.band]
        inn = derived.physical.interference[idx]
        curv = d_xx[idx] * (g * npow / inn) ** 2
        return state.eta[idx], grad_all[idx], curv, "sum_to_one", None, ("eta", idx)
    if isinstance(block, RhoBlock):
        bands = np.flatnonzero(lay.rho_mask[block.node])
        grad = delta_rho(scenario, state, derived)[block.node, bands]
        pbar = scenario.power_budget[block.node]
        curv = np.zeros(bands.size)
        for bi, q in enumerate(bands):
            own = lay.node_band_entries.get((block.node, q))
            if own is None:
                continue
            g = scenario.gains[q, lay.ent_tx[own], lay.ent_rx[own]]
            inn = derived.physical.interference[own]
            curv[bi] = np.sum(d_xx[own] * (g * pbar * state.eta[own] / inn) ** 2)
        return state.rho[block.node, bands], grad, curv, "sum_at_most_one", None, ("rho", (block.node, bands))
    if isinstance(block, PhiBlock):
        idx = np.array(lay.out_links[block.node], dtype=np.int64)
        routing = routing_marginals(scenario, state, derived)
        t = derived.flows.inflow[block.session, block.node]
        if t > 0.0:
            grad = t * routing.delta_phi[block.session, idx]
        else:
            # no inflow: the row is a flat section of the cost, 0 * inf here
            grad = np.zeros(idx.size)
        curv = np.zeros(idx.size)
        for k, li in enumerate(idx):
            sl = lay.link_slices[li]
            mu = state.mu[sl.start : sl.stop]
            curv[k] = t * t * np.sum(mu * mu * d_ff[sl.start : sl.stop])
        fixed = routing.blocked[block.session, idx]
        return state.phi[block.session, idx], grad, curv, "sum_to_one", fixed, ("phi", (block.session, idx))
    if isinstance(block, OverflowBlock):
        routing = routing_marginals(scenario, state, derived)
        sess = scenario.sessions[block.session]
        grad = np.array([routing.overflow_grad[block.session]])
        rejected = derived.flows.overflow[block.session]
        if sess.utility.kind == "log":
            curv_val = sess.demand**2 * sess.utility.weight / (1.0 + sess.demand - rejected) ** 2
        else:
            curv_val = 0.0
        cur = np.array([state.phi_w[block.session]])
        return cur, grad, np.array([curv_val]), "box", None, ("phi_w", block.session)
    raise TypeError(f"unknown block {block!r}")


def _write_coords(state, where, values):
    kind, loc = where
    if kind == "mu":
        state.mu[loc] = values
    elif kind == "eta":
        state.eta[loc] = values
    elif kind == "rho":
        node, bands = loc
        state.rho[node, bands] = values
    elif kind == "phi":
        w, idx = loc
        state.phi[w, idx] = values
    elif kind == "phi_w":
        state.phi_w[loc] = values[0]


@dataclass
class UpdateOutcome:
    state: ControlState
    cost: float
    moved: bool
    halvings: int
    step: float


def update_block(
    scenario: NetworkScenario,
    state: ControlState,
    block,
    policy: ScalingPolicy = None,
    step: float = 1.0,
    derived=None,
) -> UpdateOutcome:
    """One scaled projected step on a single block, with backtracking.

    Returns the (possibly unchanged) state and its cost.  The cost never
    increases: a trial point is accepted only when finite and satisfying
    the sufficient-decrease test; otherwise the step is halved, and after
    max_halvings the block is left untouched.
    """
    if policy is None:
        policy = ScalingPolicy()
    if derived is None:
        derived = derive(scenario, state)
    cost0 = derived.total
    cur, grad, curv, constraint, fixed, where = _block_move(scenario, state, block, derived, policy)
    finite = np.isfinite(grad)
    if not np.all(finite):
        pin = np.zeros(cur.shape, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool).copy()
        pin |= ~finite
        fixed = pin
        grad = np.where(finite, grad, 0.0)
    if fixed is not None and np.all(fixed) or not np.any(grad):
        return UpdateOutcome(state=state, cost=cost0, moved=False, halvings=0, step=step)
    weights = policy.safety * np.maximum(curv, policy.floor)
    upper = 1.0 if constraint == "box" else None
    for halving in range(policy.max_halvings + 1):
        y = cur - step * grad / weights
        z = project_scaled(y, weights, constraint, upper=upper, fixed=fixed)
        delta = z - cur
        slope = float(np.dot(grad, delta))
        if float(np.max(np.abs(delta))) <= 1e-16:
            return UpdateOutcome(state=state, cost=cost0, moved=False, halvings=halving, step=step)
        trial = state.copy()
        _write_coords(trial, where, z)
        cost1 = float(derive(scenario, trial).total)
        if math.isfinite(cost1) and cost1 <= cost0 + policy.armijo * slope:
            return UpdateOutcome(state=trial, cost=cost1, moved=True, halvings=halving, step=step)
        step *= policy.shrink
    return UpdateOutcome(state=state, cost=cost0, moved=False, halvings=policy.max_halvings, step=step)


def _gap(a: float, b: float) -> float:
    """a - b with equal infinities treated as a zero gap."""
    if a == b:
        return 0.0
    return a - b


def _simplex_residual(vals, used, excluded=None):
    keep = np.ones(len(vals), dtype=bool) if excluded is None else ~np.asarray(excluded, dtype=bool)
    used = np.asarray(used, dtype=bool) & keep
    unused = ~np.asarray(used, dtype=bool) & keep
    if not np.any(used):
        return 0.0
    u = vals[used]
    witness = float(np.min(u))
    spread = _gap(float(np.max(u)), witness)
    viol = 0.0
    if np.any(unused):
        viol = max(0.0, _gap(witness, float(np.min(vals[unused]))))
    return max(spread, viol)


@dataclass(frozen=True)
class Residuals:
    eta: float
    rho: float
    mu: float
    phi: float
    overflow: float

    @property
    def worst(self) -> float:
        return max(self.eta, self.rho, self.mu, self.phi, self.overflow)


def optimality_residuals(
    scenario: NetworkScenario,
    state: ControlState,
    derived=None,
    support_tol: float = 1e-12,
    slack_tol: float = 1e-9,
) -> Residuals:
    """Stationarity violations per block family; all terms are >= 0.

    Share groups (eta, mu, phi): used coordinates must share the minimal
    group marginal and no unused coordinate may fall below it; blocked
    routing links are exempt.  Power rows: with a slack budget the used
    marginals must vanish and unused ones must be nonnegative; with a
    tight budget the used marginals must agree on a common nonpositive
    value that no unused one undercuts.  Overflow scalars follow box
    sign conditions.  Groups that cannot affect the cost (an unpowered
    share group, an unloaded link, a node without session traffic) are
    skipped.
    """
    lay = scenario.layout
    if derived is None:
        derived = derive(scenario, state)
    if not math.isfinite(derived.total):
        raise ValueError("residuals need a finite-cost state")
    eta_msg, _ = delta_eta(scenario, state, derived)
    worst_eta = 0.0
    for (i, q), entries in lay.node_band_entries.items():
        if derived.physical.node_band_power[i, q] <= 0 or entries.size < 2:
            continue
        worst_eta = max(
            worst_eta,
            _simplex_residual(eta_msg[entries], state.eta[entries] > support_tol),
        )
    rho_grad = delta_rho(scenario, state, derived)
    worst_rho = 0.0
    for i in range(lay.n):
        bands = np.flatnonzero(lay.rho_mask[i])
        if bands.size == 0:
            continue
        vals = rho_grad[i, bands]
        used = state.rho[i, bands] > support_tol
        tight = float(state.rho[i, bands].sum()) >= 1.0 - slack_tol
        if np.any(used):
            low = float(np.min(vals[used]))
            witness = min(0.0, low) if tight else 0.0
            res = max(_gap(float(np.max(vals[used])), witness), _gap(witness, low), 0.0)
        else:
            witness = 0.0
            res = 0.0
        if np.any(~used):
            res = max(res, _gap(witness, float(np.min(vals[~used]))))
        worst_rho = max(worst_rho, res)
    mu_grad = delta_mu(scenario, state, derived)
    worst_mu = 0.0
    for li, sl in enumerate(lay.link_slices):
        if derived.flows.link_flow[li] <= 0 or sl.stop - sl.start < 2:
            continue
        idx = np.arange(sl.start, sl.stop)
        worst_mu = max(worst_mu, _simplex_residual(mu_grad[idx], state.mu[idx] > support_tol))
    routing = routing_marginals(scenario, state, derived)
    worst_phi = 0.0
    worst_over = 0.0
    for w, sess in enumerate(scenario.sessions):
        d = int(lay.dest[w])
        for i in range(lay.n):
            if i == d or derived.flows.inflow[w, i] <= 0:
                continue
            idx = np.array(lay.out_links[i], dtype=np.int64)
            if idx.size < 2:
                continue
            worst_phi = max(
                worst_phi,
                _simplex_residual(
                    routing.delta_phi[w, idx],
                    state.phi[w, idx] > support_tol,
                    excluded=routing.blocked[w, idx],
                ),
            )
        g = routing.overflow_grad[w]
        pw = state.phi_w[w]
        if pw <= support_tol:
            worst_over = max(worst_over, max(0.0, -g))
        elif pw >= 1.0 - support_tol:
            worst_over = max(worst_over, max(0.0, g))
        else:
            worst_over = max(worst_over, abs(g))
    return Residuals(eta=worst_eta, rho=worst_rho, mu=worst_mu, phi=worst_phi, overflow=worst_over)


@dataclass(frozen=True)
class TraceRow:
    sweep: int
    cost: float
    residual: float
    max_step: float


@dataclass
class SolveResult:
    state: ControlState
    cost: float
    residual: float
    sweeps: int
    converged: bool
    trace: list = field(default_factory=list)


def solve(
    scenario: NetworkScenario,
    state: ControlState,
    max_sweeps: int = 200,
    tol: float = 1e-4,
    order: str = "round_robin",
    seed: int = None,
    policy: ScalingPolicy = None,
) -> SolveResult:
    """Run block sweeps until the worst residual drops below tol.

    order "round_robin" visits blocks in the canonical order every sweep;
    "random" reshuffles them each sweep with the given seed.  Cost is
    nonincreasing across every block update.  Raises StalledStepError if
    a whole sweep moves nothing while the residual is still above tol;
    returns converged=False when the sweep budget runs out first.
    """
    if policy is None:
        policy = ScalingPolicy()
    if order not in ("round_robin", "random"):
        raise ValueError(f"unknown order {order!r}")
    rng = np.random.default_rng(seed)
    block_list = blocks(scenario)
    steps = {b: 1.0 for b in block_list}
    state = state.copy()
    derived = derive(scenario, state)
    if not math.isfinite(derived.total):
        raise ValueError("solve needs a finite-cost initial state")
    res = optimality_residuals(scenario, state, derived)
    trace = [TraceRow(sweep=0, cost=derived.total, residual=res.worst, max_step=0.0)]
    if res.worst <= tol:
        return SolveResult(
            state=state, cost=derived.total, residual=res.worst, sweeps=0, converged=True, trace=trace
        )
    for sweep in range(1, max_sweeps + 1):
        if order == "random":
            sweep_blocks = list(block_list)
            rng.shuffle(sweep_blocks)
        else:
            sweep_blocks = block_list
        moved_any = False
        max_step = 0.0
        for b in sweep_blocks:
            out = update_block(scenario, state, b, policy=policy, step=steps[b])
            if out.moved:
                state = out.state
                moved_any = True
                max_step = max(max_step, out.step)
                steps[b] = min(1.0, out.step * policy.grow)
            else:
                steps[b] = min(1.0, steps[b])
        derived = derive(scenario, state)
        res = optimality_residuals(scenario, state, derived)
        trace.append(TraceRow(sweep=sweep, cost=derived.total, residual=res.worst, max_step=max_step))
        if res.worst <= tol:
            return SolveResult(
                state=state,
                cost=derived.total,
                residual=res.worst,
                sweeps=sweep,
                converged=True,
                trace=trace,
            )
        if not moved_any:
            raise StalledStepError(res.worst, tol)
    return SolveResult(
        state=state, cost=derived.total, residual=res.worst, sweeps=max_sweeps, converged=False, trace=trace
    )
