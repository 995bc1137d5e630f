"""Pair profile functions with CFG functions and profile blocks with CFG blocks."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .cfg import BinaryCfg, FunctionCfg, reachable_blocks
from .hashing import BlendedHash, blended_hashes, function_hash
from .profile import FunctionProfile, ProfileFile

# ".llvm.123", ".lto.7": the last two dot-separated components
_SUFFIX = re.compile(r"^(?P<base>.+?)(?P<suffix>\.[^.]+\.[0-9]+)$")

LEVELS = ("full", "strict", "loose")


def strip_suffix(name: str) -> tuple[str, bool]:
    m = _SUFFIX.match(name)
    if m is None:
        return name, False
    return m.group("base"), True


@dataclass(frozen=True)
class FunctionMatch:
    profile_name: str
    cfg_name: str
    kind: str  # exact-name | hash-after-suffix-strip | unique-after-suffix-strip
    exact_profile: bool


@dataclass(frozen=True)
class BlockMatch:
    profile_bid: int
    cfg_bid: int
    level: str  # full | strict | loose | entry-forced


@dataclass
class InitialCounts:
    """Initial counts on the new CFG; ``None`` stands for an unknown count."""

    block: dict[int, Optional[int]] = field(default_factory=dict)
    jump: dict[tuple[int, int], Optional[int]] = field(default_factory=dict)


def is_exact(fp: FunctionProfile, cfg: FunctionCfg, fhash: int | None = None) -> bool:
    if fhash is None:
        fhash = function_hash(cfg)
    return fp.fhash == fhash and fp.nblocks == len(cfg.blocks)


def match_functions(profile: ProfileFile, binary: BinaryCfg, fhashes=None):
    """One-to-one function mapping; returns (matches, discarded profile names).

    ``fhashes`` optionally supplies precomputed function hashes by CFG name.
    """
    cfgs = binary.by_name()
    if fhashes is None:
        fhashes = {}

    def fh(name):
        h = fhashes.get(name)
        if h is None:
            h = fhashes[name] = function_hash(cfgs[name])
        return h

    matches = []
    free_prof = []
    used_cfg = set()
    for fp in profile.functions:
        if fp.name in cfgs:
            matches.append(FunctionMatch(fp.name, fp.name, "exact-name", is_exact(fp, cfgs[fp.name], fh(fp.name))))
            used_cfg.add(fp.name)
        else:
            free_prof.append(fp)

    # suffix heuristics over whatever is left on both sides
    prof_groups = defaultdict(list)
    for fp in free_prof:
        base, had = strip_suffix(fp.name)
        prof_groups[base].append((fp, had))
    cfg_groups = defaultdict(list)
    for name in cfgs:
        if name not in used_cfg:
            base, had = strip_suffix(name)
            cfg_groups[base].append((name, had))

    matched_prof = set()
    for base in sorted(prof_groups):
        pcands = sorted(prof_groups[base], key=lambda t: t[0].name)
        ccands = sorted(cfg_groups.get(base, ()))
        if not ccands or not (any(h for _, h in pcands) or any(h for _, h in ccands)):
            continue
        free_c = [name for name, _ in ccands]
        free_p = []
        for fp, _ in pcands:
            same = [c for c in free_c if fh(c) == fp.fhash]
            if same:
                c = same[0]
                free_c.remove(c)
                matches.append(FunctionMatch(fp.name, c, "hash-after-suffix-strip", is_exact(fp, cfgs[c], fh(c))))
                matched_prof.add(fp.name)
            else:
                free_p.append(fp)
        if len(free_p) == 1 and len(free_c) == 1:
            fp, c = free_p[0], free_c[0]
            matches.append(FunctionMatch(fp.name, c, "unique-after-suffix-strip", is_exact(fp, cfgs[c], fh(c))))
            matched_prof.add(fp.name)

    discarded = [fp.name for fp in free_prof if fp.name not in matched_prof]
    matches.sort(key=lambda m: m.profile_name)
    return matches, discarded


def match_blocks(fp: FunctionProfile, cfg: FunctionCfg, hashes: dict[int, BlendedHash] | None = None) -> list[BlockMatch]:
    """Map each profile block to a CFG block through the hash hierarchy.

    Candidates are tried at the full level (strict and neighbor components
    equal), then strict, then loose; ties go to the closest 16-bit offset,
    then to the lowest CFG id. The profile entry always maps to the CFG entry.
    """
    if hashes is None:
        hashes = blended_hashes(cfg)
    by_full = defaultdict(list)
    by_strict = defaultdict(list)
    by_loose = defaultdict(list)
    for bid, h in hashes.items():
        by_full[(h.strict16, h.neighbor16)].append((bid, h.offset16))
        by_strict[h.strict16].append((bid, h.offset16))
        by_loose[h.loose16].append((bid, h.offset16))

    out = []
    entry = fp.entry
    for bp in fp.blocks:
        h = BlendedHash.unpack(bp.hash)
        if bp.bid == entry:
            out.append(BlockMatch(bp.bid, cfg.entry, _agreement(h, hashes[cfg.entry])))
            continue
        for level, cands in (
            ("full", by_full.get((h.strict16, h.neighbor16))),
            ("strict", by_strict.get(h.strict16)),
            ("loose", by_loose.get(h.loose16)),
        ):
            if cands:
                bid, _ = min(cands, key=lambda c: (abs(c[1] - h.offset16), c[0]))
                if bid == cfg.entry:
                    # the CFG entry is reserved for the profile entry
                    others = [c for c in cands if c[0] != cfg.entry]
                    if not others:
                        continue
                    bid, _ = min(others, key=lambda c: (abs(c[1] - h.offset16), c[0]))
                out.append(BlockMatch(bp.bid, bid, level))
                break
    return out


def _agreement(a: BlendedHash, b: BlendedHash) -> str:
    if a.strict16 == b.strict16 and a.neighbor16 == b.neighbor16:
        return "full"
    if a.strict16 == b.strict16:
        return "strict"
    if a.loose16 == b.loose16:
        return "loose"
    return "entry-forced"


def assign_initial_counts(matches: list[BlockMatch], fp: FunctionProfile, cfg: FunctionCfg) -> InitialCounts:
    counts = InitialCounts()
    to_cfg = {m.profile_bid: m.cfg_bid for m in matches}
    block = {b.id: None for b in cfg.blocks}
    for bp in fp.blocks:
        c = to_cfg.get(bp.bid)
        if c is not None:
            block[c] = (block[c] or 0) + bp.exec
    edges = set(cfg.edges())
    jump = {e: None for e in cfg.edges()}
    for bp in fp.blocks:
        u = to_cfg.get(bp.bid)
        if u is None:
            continue
        for s in bp.succ:
            v = to_cfg.get(s.bid)
            if v is not None and (u, v) in edges:
                jump[(u, v)] = (jump[(u, v)] or 0) + s.cnt
    reach = reachable_blocks(cfg)
    for bid in block:
        if bid not in reach:
            block[bid] = 0
    for (u, v) in jump:
        if u not in reach:
            jump[(u, v)] = 0
    counts.block = block
    counts.jump = jump
    return counts


def staleness(profile: ProfileFile, binary: BinaryCfg, matches=None) -> float:
    """Fraction of profile samples in functions that are discarded or inexact."""
    if matches is None:
        matches, _ = match_functions(profile, binary)
    exact = {m.profile_name for m in matches if m.exact_profile}
    total = stale = 0
    for fp in profile.functions:
        mass = fp.total_exec()
        total += mass
        if fp.name not in exact:
            stale += mass
    return stale / total if total else 0.0
