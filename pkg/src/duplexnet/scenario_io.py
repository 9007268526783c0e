"""Strict JSON scenario files.

A scenario file has sections ``graph``, ``spectrum``, ``channel``,
``power``, ``sessions``, and optionally ``cost`` and ``optimizer``.
Unknown keys anywhere are errors; all problems found in one file are
reported together rather than one at a time.

Channel gains come from node positions when given (power-law path loss
``distance ** -path_loss_exponent``), from a flat ``default_gain``
otherwise, and individual directed pairs can be overridden via entries
like ``"a->b": 0.25``.  A ``band_scale`` list makes gains differ across
bands.  Noise and power budgets accept either a scalar or a per-node
mapping.  The spectrum section either runs the allocation protocol
(``bands`` plus optional ``seed``/``first_node``) or takes explicit
per-node band lists under ``outgoing``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coloring import ColorSetFamily
from .graph import build_graph
from .scenario import CostParams, NetworkScenario, Session, Utility
from .subband import allocate_subbands, allocation_from_family


class ParseError(ValueError):
    """Invalid scenario file; carries every problem found."""

    def __init__(self, source, problems):
        self.source = str(source)
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{source}: {len(self.problems)} problem(s)\n{lines}")


@dataclass
class LoadedScenario:
    scenario: NetworkScenario
    optimizer: dict = field(default_factory=dict)
    source: str = ""


_TOP_KEYS = {"graph", "spectrum", "channel", "power", "sessions", "cost", "optimizer"}
_GRAPH_KEYS = {"nodes", "edges", "positions"}
_SPECTRUM_KEYS = {"bands", "seed", "first_node", "outgoing"}
_CHANNEL_KEYS = {"path_loss_exponent", "default_gain", "noise", "gains", "band_scale"}
_POWER_KEYS = {"budget"}
_SESSION_KEYS = {"origin", "dest", "demand", "utility"}
_UTILITY_KEYS = {"kind", "weight"}
_COST_KEYS = {"bandwidth", "gain_factor"}
_OPTIMIZER_KEYS = {"max_sweeps", "tol", "order", "seed", "power", "overflow"}


def _check_keys(section, allowed, required, where, problems):
    if not isinstance(section, dict):
        problems.append(f"{where}: expected an object, got {type(section).__name__}")
        return False
    for key in section:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r} (allowed: {sorted(allowed)})")
    for key in required:
        if key not in section:
            problems.append(f"{where}: missing required key {key!r}")
    return all(k in section for k in required)


def _number(section, key, where, problems, positive=False, default=None):
    if key not in section:
        return default
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        problems.append(f"{where}.{key}: expected a number, got {val!r}")
        return default
    if positive and val <= 0:
        problems.append(f"{where}.{key}: must be positive, got {val!r}")
        return default
    return float(val)


def _per_node(value, nodes, where, problems):
    """Scalar or {node: value} mapping -> dict over all nodes, or None."""
    if isinstance(value, bool):
        problems.append(f"{where}: expected a number or mapping")
        return None
    if isinstance(value, (int, float)):
        return {v: float(value) for v in nodes}
    if isinstance(value, dict):
        out = {}
        names = {str(v): v for v in nodes}
        for key, val in value.items():
            if key not in names:
                problems.append(f"{where}: unknown node {key!r}")
                continue
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                problems.append(f"{where}[{key!r}]: expected a number")
                continue
            out[names[key]] = float(val)
        for v in nodes:
            if v not in out:
                problems.append(f"{where}: no value for node {v!r}")
        return out if len(out) == len(nodes) else None
    problems.append(f"{where}: expected a number or mapping, got {type(value).__name__}")
    return None


def load_scenario(path) -> LoadedScenario:
    """Parse and validate a scenario file, reporting all problems at once."""
    source = Path(path)
    try:
        text = source.read_text()
    except OSError as exc:
        raise ParseError(source, [f"cannot read: {exc}"]) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(source, [f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    problems = []
    if not isinstance(doc, dict):
        raise ParseError(source, ["top level must be an object"])
    for key in doc:
        if key not in _TOP_KEYS:
            problems.append(f"unknown top-level section {key!r} (allowed: {sorted(_TOP_KEYS)})")
    for key in ("graph", "spectrum", "channel", "power", "sessions"):
        if key not in doc:
            problems.append(f"missing required section {key!r}")
    if problems:
        raise ParseError(source, problems)

    graph_sec = doc["graph"]
    g = None
    positions = None
    if _check_keys(graph_sec, _GRAPH_KEYS, {"nodes", "edges"}, "graph", problems):
        nodes = graph_sec["nodes"]
        edges = graph_sec["edges"]
        if not isinstance(nodes, list) or not nodes:
            problems.append("graph.nodes: expected a nonempty list")
        elif len(set(map(str, nodes))) != len(nodes):
            problems.append("graph.nodes: duplicate node names")
        if not isinstance(edges, list):
            problems.append("graph.edges: expected a list of pairs")
        if not problems:
            known = set(nodes)
            pairs = []
            for k, edge in enumerate(edges):
                if not isinstance(edge, list) or len(edge) != 2:
                    problems.append(f"graph.edges[{k}]: expected a pair")
                    continue
                a, b = edge
                for v in (a, b):
                    if v not in known:
                        problems.append(f"graph.edges[{k}]: unknown node {v!r}")
                pairs.append((a, b))
            if not problems:
                both = []
                for a, b in pairs:
                    both.append((a, b))
                    both.append((b, a))
                try:
                    g = build_graph(both)
                except ValueError as exc:
                    problems.append(f"graph: {exc}")
                if g is not None:
                    extra = set(nodes) - set(g.nodes)
                    if extra:
                        problems.append(f"graph: nodes with no edges: {sorted(map(str, extra))}")
                        g = None
        if "positions" in graph_sec and not problems:
            positions = _per_position(graph_sec["positions"], g.nodes, problems)
    if problems:
        raise ParseError(source, problems)

    chan = doc["channel"]
    gains = noise = None
    if _check_keys(chan, _CHANNEL_KEYS, set(), "channel", problems):
        alpha = _number(chan, "path_loss_exponent", "channel", problems, positive=True, default=3.5)
        default_gain = _number(chan, "default_gain", "channel", problems, positive=True, default=0.01)
        base = np.full((g.n, g.n), default_gain)
        if positions is not None:
            for a in range(g.n):
                pa = positions[g.nodes[a]]
                for b in range(g.n):
                    if a == b:
                        continue
                    pb = positions[g.nodes[b]]
                    d = max(math.dist(pa, pb), 1e-3)
                    base[a, b] = d**-alpha
        np.fill_diagonal(base, 0.0)
        if "gains" in chan:
            overrides = chan["gains"]
            if not isinstance(overrides, dict):
                problems.append("channel.gains: expected a mapping like {'a->b': 0.5}")
            else:
                names = {str(v): i for i, v in enumerate(g.nodes)}
                for key, val in overrides.items():
                    parts = str(key).split("->")
                    if len(parts) != 2 or parts[0] not in names or parts[1] not in names:
                        problems.append(f"channel.gains: bad pair {key!r}")
                        continue
                    if isinstance(val, bool) or not isinstance(val, (int, float)) or val < 0:
                        problems.append(f"channel.gains[{key!r}]: expected a nonnegative number")
                        continue
                    base[names[parts[0]], names[parts[1]]] = float(val)
        noise_map = _per_node(chan.get("noise", 1e-3), g.nodes, "channel.noise", problems)
        band_scale = chan.get("band_scale")
        spectrum = doc["spectrum"]
        bands = None
        if _check_keys(spectrum, _SPECTRUM_KEYS, {"bands"}, "spectrum", problems):
            bands_val = spectrum["bands"]
            if isinstance(bands_val, bool) or not isinstance(bands_val, int) or bands_val < 1:
                problems.append(f"spectrum.bands: expected a positive integer, got {bands_val!r}")
            else:
                bands = bands_val
        if band_scale is not None:
            if (
                not isinstance(band_scale, list)
                or bands is not None
                and len(band_scale) != bands
                or any(isinstance(s, bool) or not isinstance(s, (int, float)) or s <= 0 for s in band_scale)
            ):
                problems.append("channel.band_scale: expected one positive number per band")
                band_scale = None
        if not problems and bands is not None:
            scale = band_scale if band_scale is not None else [1.0] * bands
            gains = np.stack([s * base for s in scale])
            noise = np.tile(
                np.array([noise_map[v] for v in g.nodes]), (bands, 1)
            )
            if np.any(noise <= 0):
                problems.append("channel.noise: values must be positive")
                gains = noise = None
    if problems:
        raise ParseError(source, problems)

    power_sec = doc["power"]
    budget = None
    if _check_keys(power_sec, _POWER_KEYS, {"budget"}, "power", problems):
        budget_map = _per_node(power_sec["budget"], g.nodes, "power.budget", problems)
        if budget_map is not None:
            if any(v <= 0 for v in budget_map.values()):
                problems.append("power.budget: values must be positive")
            else:
                budget = np.array([budget_map[v] for v in g.nodes])

    sessions_sec = doc["sessions"]
    sessions = []
    if not isinstance(sessions_sec, list) or not sessions_sec:
        problems.append("sessions: expected a nonempty list")
    else:
        names = {str(v): v for v in g.nodes}
        for k, sec in enumerate(sessions_sec):
            if not _check_keys(sec, _SESSION_KEYS, {"origin", "dest", "demand"}, f"sessions[{k}]", problems):
                continue
            origin = names.get(str(sec["origin"]))
            dest = names.get(str(sec["dest"]))
            if origin is None:
                problems.append(f"sessions[{k}].origin: unknown node {sec['origin']!r}")
            if dest is None:
                problems.append(f"sessions[{k}].dest: unknown node {sec['dest']!r}")
            demand = _number(sec, "demand", f"sessions[{k}]", problems, positive=True)
            utility = Utility()
            if "utility" in sec and _check_keys(
                sec["utility"], _UTILITY_KEYS, set(), f"sessions[{k}].utility", problems
            ):
                kind = sec["utility"].get("kind", "log")
                weight = _number(sec["utility"], "weight", f"sessions[{k}].utility", problems, positive=True, default=1.0)
                try:
                    utility = Utility(kind=kind, weight=weight if weight is not None else 1.0)
                except ValueError as exc:
                    problems.append(f"sessions[{k}].utility: {exc}")
            if origin is not None and dest is not None and demand is not None:
                try:
                    sessions.append(Session(origin=origin, dest=dest, demand=demand, utility=utility))
                except ValueError as exc:
                    problems.append(f"sessions[{k}]: {exc}")

    cost = CostParams()
    if "cost" in doc and _check_keys(doc["cost"], _COST_KEYS, set(), "cost", problems):
        bw = _number(doc["cost"], "bandwidth", "cost", problems, positive=True, default=1.0)
        kf = _number(doc["cost"], "gain_factor", "cost", problems, positive=True, default=50.0)
        if bw is not None and kf is not None:
            cost = CostParams(bandwidth=bw, gain_factor=kf)

    optimizer = {}
    if "optimizer" in doc and _check_keys(doc["optimizer"], _OPTIMIZER_KEYS, set(), "optimizer", problems):
        opt = doc["optimizer"]
        if "order" in opt and opt["order"] not in ("round_robin", "random"):
            problems.append(f"optimizer.order: expected round_robin or random, got {opt['order']!r}")
        elif "order" in opt:
            optimizer["order"] = opt["order"]
        for key, kind in (("max_sweeps", int), ("seed", int)):
            if key in opt:
                if isinstance(opt[key], bool) or not isinstance(opt[key], kind) or opt[key] < 0:
                    problems.append(f"optimizer.{key}: expected a nonnegative integer")
                else:
                    optimizer[key] = opt[key]
        for key, hi in (("tol", None), ("power", 1.0), ("overflow", 1.0)):
            if key in opt:
                val = _number(opt, key, "optimizer", problems, positive=key == "tol")
                if val is not None and hi is not None and not 0 <= val <= hi:
                    problems.append(f"optimizer.{key}: expected a value in [0, {hi:g}]")
                elif val is not None:
                    optimizer[key] = val
    if problems:
        raise ParseError(source, problems)

    spectrum = doc["spectrum"]
    if "outgoing" in spectrum:
        masks_sec = spectrum["outgoing"]
        if not isinstance(masks_sec, dict):
            raise ParseError(source, ["spectrum.outgoing: expected a mapping of node -> band list"])
        names = {str(v): v for v in g.nodes}
        masks = {}
        for key, bands_list in masks_sec.items():
            if key not in names:
                problems.append(f"spectrum.outgoing: unknown node {key!r}")
                continue
            if not isinstance(bands_list, list) or not all(
                isinstance(b, int) and not isinstance(b, bool) and 0 <= b < spectrum["bands"]
                for b in bands_list
            ):
                problems.append(f"spectrum.outgoing[{key!r}]: expected a list of band indices")
                continue
            masks[names[key]] = bands_list
        missing = set(g.nodes) - set(masks)
        if missing:
            problems.append(f"spectrum.outgoing: missing nodes {sorted(map(str, missing))}")
        if problems:
            raise ParseError(source, problems)
        family = ColorSetFamily.from_sets(spectrum["bands"], masks)
        allocation = allocation_from_family(g, family)
    else:
        seed = spectrum.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
            raise ParseError(source, [f"spectrum.seed: expected a nonnegative integer, got {seed!r}"])
        first = None
        if "first_node" in spectrum:
            first = {str(v): v for v in g.nodes}.get(str(spectrum["first_node"]))
            if first is None:
                raise ParseError(source, [f"spectrum.first_node: unknown node {spectrum['first_node']!r}"])
        allocation = allocate_subbands(g, spectrum["bands"], seed=seed, first_node=first)

    scenario = NetworkScenario(
        graph=g,
        allocation=allocation,
        gains=gains,
        noise=noise,
        power_budget=budget,
        sessions=tuple(sessions),
        cost=cost,
    )
    return LoadedScenario(scenario=scenario, optimizer=optimizer, source=str(source))


def _per_position(value, nodes, problems):
    if not isinstance(value, dict):
        problems.append("graph.positions: expected a mapping of node -> [x, y]")
        return None
    names = {str(v): v for v in nodes}
    out = {}
    for key, pos in value.items():
        if key not in names:
            problems.append(f"graph.positions: unknown node {key!r}")
            continue
        if (
            not isinstance(pos, list)
            or len(pos) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in pos)
        ):
            problems.append(f"graph.positions[{key!r}]: expected [x, y]")
            continue
        out[names[key]] = (float(pos[0]), float(pos[1]))
    missing = set(nodes) - set(out)
    if missing and not problems:
        problems.append(f"graph.positions: missing nodes {sorted(map(str, missing))}")
    return out if len(out) == len(nodes) else None
