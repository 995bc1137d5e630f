"""Quality of an inferred profile against a fresh one: edge overlap and tsp score."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .cfg import BinaryCfg, FunctionCfg

Edge = tuple[int, int]


def edge_overlap(f: Mapping[Edge, int], gt: Mapping[Edge, int]) -> float:
    sf = sum(f.values())
    sg = sum(gt.values())
    if sf == 0 and sg == 0:
        return 1.0
    if sf == 0 or sg == 0:
        return 0.0
    total = 0.0
    for e in f.keys() & gt.keys():
        total += min(f[e] / sf, gt[e] / sg)
    return min(total, 1.0)


def reorder_blocks(cfg: FunctionCfg, jump_counts: Mapping[Edge, int]) -> list[int]:
    """Greedy chain merging along the hottest edges; the entry chain goes first."""
    chain_of = {b.id: b.id for b in cfg.blocks}
    chains = {b.id: [b.id] for b in cfg.blocks}
    edges = [
        (-c, u, v) for (u, v), c in jump_counts.items()
        if c > 0 and u != v and u in chain_of and v in chain_of
    ]
    edges.sort()
    for _, u, v in edges:
        cu, cv = chain_of[u], chain_of[v]
        if cu == cv or v == cfg.entry:
            continue
        if chains[cu][-1] != u or chains[cv][0] != v:
            continue
        for b in chains[cv]:
            chain_of[b] = cu
        chains[cu].extend(chains.pop(cv))
    first = chains.pop(chain_of[cfg.entry])
    rest = sorted(chains.values(), key=min)
    return first + [b for ch in rest for b in ch]


def tsp_value(order, counts: Mapping[Edge, int]) -> int:
    return sum(counts.get((u, v), 0) for u, v in zip(order, order[1:]))


def tsp_score_raw(f: Mapping[Edge, int], gt: Mapping[Edge, int], cfg: FunctionCfg) -> float:
    best = tsp_value(reorder_blocks(cfg, gt), gt)
    if best == 0:
        return 1.0
    return tsp_value(reorder_blocks(cfg, f), gt) / best


def tsp_score(f: Mapping[Edge, int], gt: Mapping[Edge, int], cfg: FunctionCfg) -> float:
    # the layout heuristic is not optimal, so a few instances exceed 1
    return min(tsp_score_raw(f, gt, cfg), 1.0)


@dataclass
class FunctionMetrics:
    name: str
    weight: int
    edge_overlap: float
    tsp_score: float
    tsp_score_raw: float


@dataclass
class MetricsReport:
    edge_overlap: float
    tsp_score: float
    staleness: float
    edge_overlap_unweighted: float
    tsp_score_unweighted: float
    functions: list[FunctionMetrics] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "edge_overlap": self.edge_overlap,
            "edge_overlap_unweighted": self.edge_overlap_unweighted,
            "functions": [
                {
                    "edge_overlap": fm.edge_overlap,
                    "name": fm.name,
                    "tsp_score": fm.tsp_score,
                    "tsp_score_raw": fm.tsp_score_raw,
                    "weight": fm.weight,
                }
                for fm in self.functions
            ],
            "staleness": self.staleness,
            "tsp_score": self.tsp_score,
            "tsp_score_unweighted": self.tsp_score_unweighted,
        }


def evaluate(inferred, fresh, binary: BinaryCfg, staleness: float = 0.0) -> MetricsReport:
    """Score every function of ``binary``; binary-level values are weighted by fresh sample mass.

    Functions missing from a profile count as all-zero there. Functions with
    no fresh samples are reported but carry zero weight.
    """
    inf = inferred.by_name()
    fr = fresh.by_name()
    per = []
    for fn in binary.functions:
        edges = set(fn.edges())
        fi = inf.get(fn.name)
        fg = fr.get(fn.name)
        f = {e: c for e, c in fi.edge_counts().items() if e in edges} if fi else {}
        gt = {e: c for e, c in fg.edge_counts().items() if e in edges} if fg else {}
        weight = fg.total_exec() if fg else 0
        raw = tsp_score_raw(f, gt, fn)
        per.append(FunctionMetrics(fn.name, weight, edge_overlap(f, gt), min(raw, 1.0), raw))
    total = sum(fm.weight for fm in per)
    if total:
        overlap = sum(fm.weight * fm.edge_overlap for fm in per) / total
        tsp = sum(fm.weight * fm.tsp_score for fm in per) / total
    else:
        overlap = tsp = 1.0
    n = len(per)
    return MetricsReport(
        edge_overlap=overlap,
        tsp_score=tsp,
        staleness=staleness,
        edge_overlap_unweighted=sum(fm.edge_overlap for fm in per) / n if n else 1.0,
        tsp_score_unweighted=sum(fm.tsp_score for fm in per) / n if n else 1.0,
        functions=per,
    )
