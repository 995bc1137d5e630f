"""End-to-end driver: match functions, infer stale ones, emit a profile."""

from __future__ import annotations

import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .cfg import BinaryCfg, FunctionCfg
from .hashing import blended_hashes, function_hash
from .inference import FlowFunction, InferenceParams, conservation_violations, infer
from .matcher import (
    FunctionMatch,
    assign_initial_counts,
    match_blocks,
    match_functions,
    staleness,
)
from .profile import BlockProfile, FunctionProfile, ProfileFile, SuccessorRecord


class InvariantViolation(RuntimeError):
    """Inference produced counts that break flow conservation."""


@dataclass
class FunctionOutcome:
    match: FunctionMatch
    profile: FunctionProfile
    levels: dict = field(default_factory=dict)
    objective: int = 0
    inferred: bool = False
    runtime_ms: float = 0.0


@dataclass
class PipelineResult:
    profile: ProfileFile
    outcomes: list[FunctionOutcome]
    discarded: list[str]
    staleness: float

    @property
    def n_exact(self) -> int:
        return sum(1 for o in self.outcomes if not o.inferred)

    @property
    def n_inferred(self) -> int:
        return sum(1 for o in self.outcomes if o.inferred)

    def summary(self) -> str:
        total = len(self.outcomes) + len(self.discarded)
        return (
            f"functions={total} exact={self.n_exact} matched={self.n_inferred} "
            f"discarded={len(self.discarded)} staleness={self.staleness:.4f}"
        )


def profile_from_flow(cfg: FunctionCfg, ff: FlowFunction) -> FunctionProfile:
    hashes = blended_hashes(cfg)
    index = {b.id: i for i, b in enumerate(cfg.blocks)}
    succ = {b.id: [] for b in cfg.blocks}
    for (u, v), x in zip(cfg.edges(), ff.edge_flow):
        if x > 0:
            succ[u].append(SuccessorRecord(v, x))
    blocks = tuple(
        BlockProfile(b.id, hashes[b.id].packed64, ff.vertex_flow[index[b.id]], tuple(succ[b.id]))
        for b in cfg.blocks
    )
    return FunctionProfile(cfg.name, function_hash(cfg), ff.vertex_flow[index[cfg.entry]], len(cfg.blocks), blocks)


def infer_function(fp: FunctionProfile, cfg: FunctionCfg, params=InferenceParams(), rebalance=True):
    """Match blocks of one stale function and infer its counts.

    Returns ``(FunctionProfile, block matches, inferred FlowFunction)``.
    """
    hashes = blended_hashes(cfg)
    matches = match_blocks(fp, cfg, hashes)
    initial = assign_initial_counts(matches, fp, cfg)
    ff = infer(FlowFunction.from_cfg(cfg, initial), params, rebalance=rebalance)
    bad = conservation_violations(ff)
    if bad:
        raise InvariantViolation(f"{cfg.name}: conservation broken at vertices {bad[:5]}")
    return profile_from_flow(cfg, ff), matches, ff


def _work(args):
    match, fp, cfg, params, rebalance = args
    t0 = time.perf_counter()
    out, matches, ff = infer_function(fp, cfg, params, rebalance)
    ms = (time.perf_counter() - t0) * 1000.0
    levels = Counter(m.level for m in matches)
    return FunctionOutcome(match, out, dict(sorted(levels.items())), ff.objective, True, ms)


def run_pipeline(
    binary: BinaryCfg,
    profile: ProfileFile,
    params: InferenceParams = InferenceParams(),
    rebalance: bool = True,
    jobs: int = 1,
    fast_path: bool = True,
) -> PipelineResult:
    """Match every profiled function and infer counts for the stale ones.

    With ``fast_path`` off, exactly matching functions are inferred as well,
    which repairs profiles whose counts are not flow-consistent.
    """
    cfgs = binary.by_name()
    prof = profile.by_name()
    fhashes: dict[str, int] = {}
    matches, discarded = match_functions(profile, binary, fhashes)
    outcomes: list[FunctionOutcome] = []
    work = []
    for m in matches:
        fp = prof[m.profile_name]
        if m.exact_profile and fast_path:
            # exact profiles are taken as is
            outcomes.append(FunctionOutcome(m, replace(fp, name=m.cfg_name), {"full": fp.nblocks}))
        else:
            work.append((m, fp, cfgs[m.cfg_name], params, rebalance))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes += pool.map(_work, work, chunksize=max(1, len(work) // (4 * jobs)))
    else:
        outcomes += map(_work, work)
    outcomes.sort(key=lambda o: o.match.cfg_name)
    out = ProfileFile(tuple(o.profile for o in outcomes))
    return PipelineResult(out, outcomes, sorted(discarded), staleness(profile, binary, matches))


def exact_only(profile: ProfileFile, binary: BinaryCfg) -> ProfileFile:
    """The discard strategy: keep only profiles that apply exactly."""
    matches, _ = match_functions(profile, binary)
    prof = profile.by_name()
    kept = [replace(prof[m.profile_name], name=m.cfg_name) for m in matches if m.exact_profile]
    return ProfileFile(tuple(sorted(kept, key=lambda fp: fp.name)))


def default_jobs() -> int:
    return os.cpu_count() or 1
