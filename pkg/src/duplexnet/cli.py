"""Command line interface.

Subcommands:

* ``spectrum``: run the sub-band allocation on a scenario's graph and
  print the per-node and per-link band assignment, the bound comparison,
  and the duplexing check.
* ``optimize``: minimize total cost from the even-split starting state,
  printing a per-sweep trace (optionally to CSV) and the final summary.
* ``check``: verify analytic gradients against finite differences at an
  interior state, and scan the link-cost curvature matrix for positive
  semidefiniteness; exits nonzero when a sub-check fails.
* ``oracle``: on a small scenario, compare the block solver against the
  independent numeric reference solver.

Exit codes: 0 success, 1 a check or convergence failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import sys

from .coloring import min_subband_count
from .graph import interference_stats
from .oracle import TooLargeError, finite_diff_check, reference_solve_small
from .optimizer import StalledStepError, solve
from .scenario import check_m_psd, derive, uniform_state
from .scenario_io import ParseError, load_scenario
from .subband import allocate_subbands, check_allocation


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _load(path, out):
    try:
        return load_scenario(path)
    except ParseError as exc:
        print(exc, file=out)
        return None
    except ValueError as exc:
        print(f"{path}: {exc}", file=out)
        return None


def _cmd_spectrum(args, out) -> int:
    loaded = _load(args.scenario, out)
    if loaded is None:
        return 2
    scen = loaded.scenario
    g = scen.graph
    alloc = scen.allocation
    if args.seed is not None:
        # rerun the protocol with the override instead of the file's allocation
        alloc = allocate_subbands(g, alloc.band_count, seed=args.seed)
    stats = interference_stats(g)
    protocol_bound = min_subband_count(g.max_degree() + 1)
    lines = []
    lines.append(f"bands: {alloc.band_count}")
    lines.append(
        f"interference-graph bound {stats.max_degree + 1} vs protocol bound {protocol_bound}"
    )
    for node in g.nodes:
        bands = ",".join(str(b) for b in alloc.outgoing_bands(node))
        lines.append(f"node {node}: bands {bands}")
    for i, j in sorted(g.links, key=lambda lk: (str(lk[0]), str(lk[1]))):
        bands = ",".join(str(b) for b in alloc.bands_of(i, j))
        lines.append(f"link {i}->{j}: bands {bands}")
    report = check_allocation(g, alloc)
    lines.append(f"duplexing check: {'ok' if report.ok else 'FAILED'}")
    if not report.ok:
        for lk in report.coverage_violations:
            lines.append(f"  uncovered link {lk[0]}->{lk[1]}")
        for node, band in report.duplexing_violations:
            lines.append(f"  node {node} transmits and receives on band {band}")
    text = "\n".join(lines) + "\n"
    out.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0 if report.ok else 1


def _cmd_optimize(args, out) -> int:
    loaded = _load(args.scenario, out)
    if loaded is None:
        return 2
    scen = loaded.scenario
    opts = loaded.optimizer
    max_sweeps = args.max_sweeps if args.max_sweeps is not None else opts.get("max_sweeps", 200)
    tol = args.tol if args.tol is not None else opts.get("tol", 1e-4)
    order = args.order if args.order is not None else opts.get("order", "round_robin")
    seed = args.seed if args.seed is not None else opts.get("seed")
    state = uniform_state(scen, power=opts.get("power", 0.9), overflow=opts.get("overflow", 0.1))
    start = derive(scen, state).total
    print(f"initial cost: {_fmt(start)}", file=out)
    try:
        result = solve(scen, state, max_sweeps=max_sweeps, tol=tol, order=order, seed=seed)
    except StalledStepError as exc:
        print(f"stalled: {exc}", file=out)
        return 1
    except ValueError as exc:
        print(f"cannot start solver: {exc}", file=out)
        return 1
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("sweep,cost,residual,max_step\n")
            for row in result.trace:
                fh.write(f"{row.sweep},{_fmt(row.cost)},{_fmt(row.residual)},{_fmt(row.max_step)}\n")
    print(f"final cost: {_fmt(result.cost)}", file=out)
    print(f"residual: {_fmt(result.residual)}", file=out)
    print(f"sweeps: {result.sweeps}", file=out)
    print(f"converged: {'yes' if result.converged else 'no'}", file=out)
    return 0 if result.converged else 1


def _cmd_check(args, out) -> int:
    loaded = _load(args.scenario, out)
    if loaded is None:
        return 2
    scen = loaded.scenario
    opts = loaded.optimizer
    state = uniform_state(scen, power=opts.get("power", 0.9), overflow=opts.get("overflow", 0.1))
    failures = 0
    try:
        report = finite_diff_check(scen, state)
        ok = report.worst <= args.grad_tol
        print(
            f"gradient check: {'pass' if ok else 'FAIL'} "
            f"(worst relative error {report.worst:.3g} over {report.total_checked} coordinates)",
            file=out,
        )
        failures += 0 if ok else 1
    except (ValueError, RuntimeError) as exc:
        print(f"gradient check: FAIL ({exc})", file=out)
        failures += 1
    psd = check_m_psd(scen.cost, grid=args.grid)
    print(
        f"curvature check: {'pass' if psd.psd else 'FAIL'} ({psd})",
        file=out,
    )
    failures += 0 if psd.psd else 1
    return 1 if failures else 0


def _cmd_oracle(args, out) -> int:
    loaded = _load(args.scenario, out)
    if loaded is None:
        return 2
    scen = loaded.scenario
    opts = loaded.optimizer
    state = uniform_state(scen, power=opts.get("power", 0.9), overflow=opts.get("overflow", 0.1))
    try:
        ref = reference_solve_small(scen, seed=args.seed or 0, restarts=args.restarts, sweeps=args.sweeps)
    except TooLargeError as exc:
        print(f"scenario too large for the reference solver: {exc}", file=out)
        return 2
    try:
        result = solve(scen, state, max_sweeps=args.max_sweeps, tol=args.tol)
    except StalledStepError as exc:
        print(f"solver stalled: {exc}", file=out)
        return 1
    except ValueError as exc:
        print(f"cannot start solver: {exc}", file=out)
        return 1
    print(f"solver cost: {_fmt(result.cost)}", file=out)
    print(f"reference cost: {_fmt(ref.cost)} (best of {len(ref.restart_costs)} restarts)", file=out)
    gap = abs(result.cost - ref.cost) / max(abs(ref.cost), 1e-12)
    print(f"relative gap: {gap:.3e}", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duplexnet",
        description="Duplexing-aware sub-band allocation and network cost optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="allocate sub-bands on the scenario graph")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", help="also write the allocation text to this file")
    p.add_argument("--seed", type=int, default=None, help="rerun the protocol with this seed")

    p = sub.add_parser("optimize", help="minimize total cost from the even-split state")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--max-sweeps", "--max-iters", dest="max_sweeps", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--order", choices=("round_robin", "random"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", help="write the per-sweep trace to this CSV file")

    p = sub.add_parser("check", help="finite-difference gradient check and curvature scan")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--grad-tol", type=float, default=1e-5)
    p.add_argument("--grid", type=int, default=50)

    p = sub.add_parser("oracle", help="compare the solver against the numeric reference")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--sweeps", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-sweeps", type=int, default=400)
    p.add_argument("--tol", type=float, default=1e-5)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    args = build_parser().parse_args(argv)
    handlers = {
        "spectrum": _cmd_spectrum,
        "optimize": _cmd_optimize,
        "check": _cmd_check,
        "oracle": _cmd_oracle,
    }
    return handlers[args.command](args, out)


if __name__ == "__main__":
    sys.exit(main())
