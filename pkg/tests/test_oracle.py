"""Independent reference solver and the finite-difference harness.

The reference search knows nothing about the analytic gradients, so
agreement with the block solver on small instances is evidence for both.
A deliberate fault injection makes sure the agreement test would catch a
biased evaluator rather than silently passing.
"""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from duplexnet import oracle as oracle_mod
from duplexnet.oracle import (
    BoundaryTooCloseError,
    TooLargeError,
    finite_diff_check,
    reference_solve_small,
)
from duplexnet.optimizer import solve
from duplexnet.scenario import (
    CostParams,
    NetworkScenario,
    Session,
    evaluate_physical,
    total_cost,
    uniform_state,
)
from duplexnet.subband import allocate_subbands

from helpers import line3_scenario, line5_scenario, pair_scenario, path_graph


def test_reference_matches_solver_on_line():
    line3 = line3_scenario()
    res = solve(line3, uniform_state(line3, 0.9, 0.1), max_sweeps=400, tol=1e-4)
    ref = reference_solve_small(line3, seed=0, restarts=5)
    assert abs(res.cost - ref.cost) / ref.cost <= 1e-6
    # every restart lands in the same basin on this instance
    spread = max(ref.restart_costs) - min(ref.restart_costs)
    assert spread / ref.cost <= 1e-6
    assert ref.evaluations > 0


def test_reference_reports_true_cost_of_returned_state():
    line3 = line3_scenario()
    ref = reference_solve_small(line3, seed=0, restarts=3)
    assert total_cost(line3, ref.state) == pytest.approx(ref.cost, rel=1e-9)


def test_reference_is_deterministic():
    line3 = line3_scenario()
    a = reference_solve_small(line3, seed=4, restarts=3)
    b = reference_solve_small(line3, seed=4, restarts=3)
    assert a.cost == b.cost
    assert a.restart_costs == b.restart_costs
    assert a.state.rho.tobytes() == b.state.rho.tobytes()
    assert a.state.phi.tobytes() == b.state.phi.tobytes()


def test_agreement_test_catches_biased_evaluator(monkeypatch):
    # bias the oracle's internal objective by a flow-dependent term; the
    # reported optimum must then disagree with the true cost function,
    # which is exactly what the solver-vs-reference comparison relies on
    line3 = line3_scenario()
    orig = oracle_mod._OracleProblem.evaluate

    def biased(self, vec):
        val = orig(self, vec)
        return val + 0.05 * float(np.sum(self.split(vec)[1]))

    monkeypatch.setattr(oracle_mod._OracleProblem, "evaluate", biased)
    bad = reference_solve_small(line3, seed=0, restarts=3)
    monkeypatch.undo()
    assert abs(bad.cost - total_cost(line3, bad.state)) > 1e-3


def test_freeze_power_reduces_to_scalar_problem():
    """With frozen power the two-node case is a one-dimensional search.

    The session rides a single (link, band) entry, so the optimum over
    flow f is min f / (cap - f) + w * (ln(1 + d) - ln(1 + f)) on [0, d],
    solvable independently with a bounded scalar minimizer.
    """
    pair = pair_scenario()
    ref = reference_solve_small(pair, seed=0, restarts=5, freeze_power=True)
    phys = evaluate_physical(pair, ref.state)
    lay = pair.layout
    loaded = [e for e in range(lay.n_entries) if lay.ent_tx[e] == lay.origin[0]]
    cap = max(
        pair.cost.bandwidth * math.log(pair.cost.gain_factor * phys.sinr[e]) for e in loaded
    )
    d = pair.sessions[0].demand
    w = pair.sessions[0].utility.weight

    def scalar_cost(f):
        return f / (cap - f) + w * (math.log(1.0 + d) - math.log(1.0 + f))

    r = minimize_scalar(scalar_cost, bounds=(0.0, d), method="bounded",
                        options={"xatol": 1e-12})
    assert ref.cost <= r.fun + 1e-9, "reference must not lose to the scalar search"
    assert abs(ref.cost - r.fun) <= 1e-6


def test_size_guards():
    with pytest.raises(TooLargeError, match="nodes"):
        reference_solve_small(line5_scenario())
    line3 = line3_scenario()
    many = NetworkScenario(
        graph=line3.graph,
        allocation=line3.allocation,
        gains=line3.gains,
        noise=line3.noise,
        power_budget=line3.power_budget,
        sessions=(Session(0, 2, 0.2), Session(2, 0, 0.2), Session(0, 1, 0.1)),
        cost=line3.cost,
    )
    with pytest.raises(TooLargeError, match="sessions"):
        reference_solve_small(many)
    g = path_graph(3)
    wide = NetworkScenario(
        graph=g,
        allocation=allocate_subbands(g, 4),
        gains=np.tile(line3.gains[:1], (4, 1, 1)),
        noise=np.tile(line3.noise[:1], (4, 1)),
        power_budget=line3.power_budget,
        sessions=line3.sessions,
        cost=CostParams(),
    )
    with pytest.raises(TooLargeError, match="bands"):
        reference_solve_small(wide)


def test_finite_diff_check_rejects_boundary_states():
    # at full power the single loaded entry has capacity ln(50 * 500),
    # about 10.13; a demand of 9.8 parks the flow inside the headroom
    # band where central differences would straddle the barrier
    pair = pair_scenario(demand=9.8)
    st = uniform_state(pair, 1.0, 0.0)
    with pytest.raises(BoundaryTooCloseError):
        finite_diff_check(pair, st)


def test_finite_diff_check_rejects_infinite_state():
    line3 = line3_scenario()
    st = uniform_state(line3, 0.9, 0.1)
    st.rho[:, :] = 0.0
    with pytest.raises(ValueError, match="finite"):
        finite_diff_check(line3, st)
