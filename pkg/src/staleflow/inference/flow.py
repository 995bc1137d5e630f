"""Profile inference: complete, flow-consistent counts from partial ones.

Objective over counted vertices and edges, with ``f`` the inferred value::

    cost(f, cnt) = k_inc * (f - cnt)   if f >= cnt
                   k_dec * (cnt - f)   otherwise

Counted edges are first replaced by counted midpoint vertices so that only
vertices carry counts. Each vertex v is split into v_in -> v_out; a counted
vertex gets two parallel arcs, (capacity cnt, cost -k_dec) and (unbounded,
cost +k_inc), so the network cost equals the objective minus
``sum(k_dec * cnt)``. A source S feeds the entry, exits drain into a sink T,
and T -> S closes the circulation.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .mcf import UNBOUNDED, FlowNetwork, solve_min_cost_flow

log = logging.getLogger(__name__)

COUNT_CAP = 1 << 44
DEFAULT_EXIT_PENALTY = 1 << 20


@dataclass(frozen=True)
class InferenceParams:
    k_inc: int = 1
    k_dec: int = 2
    exit_penalty: int = DEFAULT_EXIT_PENALTY

    def __post_init__(self):
        for name in ("k_inc", "k_dec", "exit_penalty"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class FlowFunction:
    """Inference-facing graph; vertices are ``0..n-1``, counts use None for unknown."""

    vertex_counts: list[Optional[int]]
    edges: list[tuple[int, int]]
    edge_counts: list[Optional[int]]
    entry: int = 0
    labels: Optional[list[int]] = None  # block id per vertex, for tie-breaking and output
    # results
    vertex_flow: Optional[list[int]] = None
    edge_flow: Optional[list[int]] = None
    exit_flow: dict[int, int] = field(default_factory=dict)  # artificial exits only
    objective: Optional[int] = None
    # subdivision bookkeeping: new vertex -> original edge, new edge -> original edge
    split_from: dict[int, int] = field(default_factory=dict)
    edge_origin: Optional[list[int]] = None

    @property
    def n(self) -> int:
        return len(self.vertex_counts)

    def label(self, v: int) -> int:
        return self.labels[v] if self.labels is not None else v

    def exits(self) -> list[int]:
        has_out = [False] * self.n
        for u, _ in self.edges:
            has_out[u] = True
        return [v for v in range(self.n) if not has_out[v]]

    def out_edges(self) -> list[list[int]]:
        out = [[] for _ in range(self.n)]
        for i, (u, _) in enumerate(self.edges):
            out[u].append(i)
        return out

    def in_edges(self) -> list[list[int]]:
        inc = [[] for _ in range(self.n)]
        for i, (_, v) in enumerate(self.edges):
            inc[v].append(i)
        return inc

    def reachable(self) -> list[bool]:
        out = self.out_edges()
        seen = [False] * self.n
        seen[self.entry] = True
        stack = [self.entry]
        while stack:
            u = stack.pop()
            for i in out[u]:
                v = self.edges[i][1]
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return seen

    @classmethod
    def from_cfg(cls, cfg, initial=None) -> "FlowFunction":
        """Build from a FunctionCfg and optional InitialCounts."""
        index = {b.id: i for i, b in enumerate(cfg.blocks)}
        edges = cfg.edges()
        vc = [None] * len(cfg.blocks)
        ec = [None] * len(edges)
        if initial is not None:
            vc = [initial.block.get(b.id) for b in cfg.blocks]
            ec = [initial.jump.get(e) for e in edges]
        return cls(
            vertex_counts=vc,
            edges=[(index[u], index[v]) for u, v in edges],
            edge_counts=ec,
            entry=index[cfg.entry],
            labels=[b.id for b in cfg.blocks],
        )


def cost(f: int, cnt: int, params: InferenceParams) -> int:
    if f >= cnt:
        return params.k_inc * (f - cnt)
    return params.k_dec * (cnt - f)


def objective(ff: FlowFunction, vertex_flow: Sequence[int], edge_flow: Sequence[int], params: InferenceParams) -> int:
    total = 0
    for v, c in enumerate(ff.vertex_counts):
        if c is not None:
            total += cost(vertex_flow[v], c, params)
    for i, c in enumerate(ff.edge_counts):
        if c is not None:
            total += cost(edge_flow[i], c, params)
    return total


def conservation_violations(ff: FlowFunction) -> list[int]:
    """Vertices where the inferred flow breaks a conservation rule."""
    f, fe = ff.vertex_flow, ff.edge_flow
    inflow = [0] * ff.n
    outflow = [0] * ff.n
    for i, (u, v) in enumerate(ff.edges):
        if fe[i] < 0:
            return [u]
        outflow[u] += fe[i]
        inflow[v] += fe[i]
    for v, x in ff.exit_flow.items():
        outflow[v] += x
    bad = []
    exits = set(ff.exits())
    for v in range(ff.n):
        if f[v] < 0:
            bad.append(v)
        elif v in exits:
            if f[v] != inflow[v] and v != ff.entry:
                bad.append(v)
            elif v == ff.entry and f[v] < inflow[v]:
                bad.append(v)
        elif v == ff.entry:
            if f[v] != outflow[v] or inflow[v] > f[v]:
                bad.append(v)
        elif not (f[v] == inflow[v] == outflow[v]):
            bad.append(v)
    return bad


def _clamp(c, what):
    if c is not None and c > COUNT_CAP:
        warnings.warn(f"{what} count {c} capped at 2^44")
        return COUNT_CAP
    return c


def subdivide_counted_edges(ff: FlowFunction) -> FlowFunction:
    """Replace each counted edge (u, v) by u -> w -> v with cnt(w) = cnt(u, v)."""
    vc = list(ff.vertex_counts)
    labels = list(ff.labels) if ff.labels is not None else None
    edges, ec, origin = [], [], []
    split_from = {}
    for i, ((u, v), c) in enumerate(zip(ff.edges, ff.edge_counts)):
        if c is None:
            edges.append((u, v))
            ec.append(None)
            origin.append(i)
            continue
        w = len(vc)
        vc.append(c)
        if labels is not None:
            labels.append(-1 - i)
        split_from[w] = i
        edges += [(u, w), (w, v)]
        ec += [None, None]
        origin += [i, i]
    return FlowFunction(vc, edges, ec, ff.entry, labels, split_from=split_from, edge_origin=origin)


def build_network(ff: FlowFunction, params: InferenceParams = InferenceParams()) -> FlowNetwork:
    """Min-cost circulation network for a FlowFunction without counted edges.

    Bookkeeping is attached as ``vertex_arcs``, ``edge_arcs`` and ``exit_arcs``.
    """
    if any(c is not None for c in ff.edge_counts):
        raise ValueError("subdivide counted edges before building the network")
    reach = ff.reachable()
    n = ff.n
    net = FlowNetwork(2 * n + 2)
    S, T = 2 * n, 2 * n + 1
    vertex_arcs: list[list[int]] = [[] for _ in range(n)]
    for v in range(n):
        if not reach[v]:
            c = ff.vertex_counts[v]
            if c:
                warnings.warn(f"vertex {ff.label(v)} is unreachable; dropping its count {c}")
            continue
        c = _clamp(ff.vertex_counts[v], f"vertex {ff.label(v)}")
        vin, vout = 2 * v, 2 * v + 1
        if c is None:
            vertex_arcs[v].append(net.add_arc(vin, vout, UNBOUNDED, 0))
        else:
            vertex_arcs[v].append(net.add_arc(vin, vout, c, -params.k_dec))
            vertex_arcs[v].append(net.add_arc(vin, vout, UNBOUNDED, params.k_inc))
    edge_arcs: list[Optional[int]] = []
    for u, v in ff.edges:
        edge_arcs.append(net.add_arc(2 * u + 1, 2 * v) if reach[u] else None)
    net.add_arc(S, 2 * ff.entry)
    exit_arcs = {}
    exits = [t for t in ff.exits() if reach[t]]
    if exits:
        for t in exits:
            net.add_arc(2 * t + 1, T)
    else:
        # midpoints of subdivided edges do not leak
        for v in range(n):
            if reach[v] and v not in ff.split_from:
                exit_arcs[v] = net.add_arc(2 * v + 1, T, UNBOUNDED, params.exit_penalty)
    net.circulation_arc = net.add_arc(T, S)
    net.vertex_arcs = vertex_arcs
    net.edge_arcs = edge_arcs
    net.exit_arcs = exit_arcs
    return net


def infer(ff: FlowFunction, params: InferenceParams = InferenceParams(), rebalance: bool = True) -> FlowFunction:
    """Fill ``vertex_flow``/``edge_flow``/``objective`` on a copy of ``ff``."""
    ff = replace(
        ff,
        vertex_counts=[_clamp(c, "vertex") for c in ff.vertex_counts],
        edge_counts=[_clamp(c, "edge") for c in ff.edge_counts],
    )
    sub = subdivide_counted_edges(ff)
    net = solve_min_cost_flow(build_network(sub, params))
    flow = net.flow
    sub_vf = [sum(flow(a) for a in arcs) for arcs in net.vertex_arcs]
    vertex_flow = sub_vf[: ff.n]
    edge_flow = [0] * len(ff.edges)
    for j, a in enumerate(net.edge_arcs):
        i = sub.edge_origin[j]
        if ff.edge_counts[i] is None and a is not None:
            edge_flow[i] = flow(a)
    for w, i in sub.split_from.items():
        edge_flow[i] = sub_vf[w]
    out = replace(ff, vertex_flow=vertex_flow, edge_flow=edge_flow)
    out.exit_flow = {v: flow(a) for v, a in net.exit_arcs.items() if flow(a)}
    if out.exit_flow:
        log.debug("flow leaves through artificial exits at %d vertices", len(out.exit_flow))
    if rebalance:
        out = rebalance_unknown_subgraphs(out)
    out.objective = objective(out, out.vertex_flow, out.edge_flow, params)
    return out


def rebalance_unknown_subgraphs(ff: FlowFunction) -> FlowFunction:
    """Spread flow evenly through acyclic unknown regions between two known blocks.

    A region is a weakly connected set of uncounted vertices (not the entry,
    no exits) whose boundary and interior edges are all uncounted, entered
    only from one known vertex and left only towards one known vertex.
    """
    n = ff.n
    vf = list(ff.vertex_flow)
    ef = list(ff.edge_flow)
    unknown = [c is None for c in ff.vertex_counts]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in ff.edges:
        if unknown[u] and unknown[v]:
            parent[find(u)] = find(v)
    groups: dict[int, list[int]] = {}
    for v in range(n):
        if unknown[v]:
            groups.setdefault(find(v), []).append(v)
    out_e, in_e = ff.out_edges(), ff.in_edges()
    # components sharing one (source, sink) pair form a single region
    regions: dict[tuple[int, int], list] = {}
    for members in sorted(groups.values()):
        comp = set(members)
        if ff.entry in comp or any(not out_e[v] or v in ff.exit_flow for v in members):
            continue
        entering, internal, leaving = [], [], []
        for v in members:
            entering += [i for i in in_e[v] if ff.edges[i][0] not in comp]
            for i in out_e[v]:
                (internal if ff.edges[i][1] in comp else leaving).append(i)
        if any(ff.edge_counts[i] is not None for i in entering + internal + leaving):
            continue
        srcs = {ff.edges[i][0] for i in entering}
        snks = {ff.edges[i][1] for i in leaving}
        if len(srcs) != 1 or len(snks) != 1:
            continue
        if _topological(members, internal, ff.edges) is None:
            continue
        key = (srcs.pop(), snks.pop())
        regions.setdefault(key, []).append((members, entering, internal))

    by_target = lambda i: ff.label(ff.edges[i][1])
    for key in sorted(regions):
        members = [v for m, _, _ in regions[key] for v in m]
        entering = [i for _, e, _ in regions[key] for i in e]
        internal = [i for _, _, e in regions[key] for i in e]
        region = set(members)
        order = _topological(members, internal, ff.edges)
        inflow = {v: 0 for v in members}
        total = sum(ef[i] for i in entering)
        for i, share in zip(sorted(entering, key=by_target), _even(total, len(entering))):
            ef[i] = share
            inflow[ff.edges[i][1]] += share
        for v in order:
            vf[v] = inflow[v]
            outs = sorted(out_e[v], key=by_target)
            for i, share in zip(outs, _even(inflow[v], len(outs))):
                ef[i] = share
                t = ff.edges[i][1]
                if t in region:
                    inflow[t] += share
    return replace(ff, vertex_flow=vf, edge_flow=ef, exit_flow=dict(ff.exit_flow))


def _even(total: int, k: int) -> list[int]:
    q, r = divmod(total, k)
    return [q + 1] * r + [q] * (k - r)


def _topological(members, internal, edges):
    indeg = {v: 0 for v in members}
    succ = {v: [] for v in members}
    for i in internal:
        u, v = edges[i]
        indeg[v] += 1
        succ[u].append(v)
    ready = sorted(v for v in members if indeg[v] == 0)
    order = []
    while ready:
        u = ready.pop(0)
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    return order if len(order) == len(members) else None
