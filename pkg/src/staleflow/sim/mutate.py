"""Controlled code drift between two revisions of a binary."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..cfg import BasicBlock, BinaryCfg, FunctionCfg, Instruction
from .generate import REGISTERS, opcode_pool, random_instruction
from .rng import SplitMix64, derive_seed

KINDS = (
    "operand-change",
    "opcode-change",
    "nop-insert",
    "block-insert",
    "block-delete",
    "branch-retarget",
    "inline-duplicate",
)
_HASHED = ("normal", "call", "conditional-branch")


@dataclass(frozen=True)
class MutationConfig:
    seed: int = 1
    rate: float = 0.05
    kinds: tuple[str, ...] = KINDS
    opcode_pool_size: int = 24

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        unknown = set(self.kinds) - set(KINDS)
        if unknown:
            raise ValueError(f"unknown mutation kinds: {sorted(unknown)}")
        if not self.kinds:
            raise ValueError("at least one mutation kind must be enabled")


@dataclass
class MutationResult:
    binary: BinaryCfg
    log: list[dict] = field(default_factory=list)
    tables: dict = field(default_factory=dict)


class _Fn:
    """Mutable working copy of one function."""

    def __init__(self, fn: FunctionCfg, probs):
        self.name = fn.name
        self.entry = fn.entry
        self.order = [b.id for b in fn.blocks]
        self.ins = {b.id: list(b.instructions) for b in fn.blocks}
        self.succ = {b.id: list(b.successors) for b in fn.blocks}
        self.probs = {k: list(v) for k, v in probs.items()}

    def snapshot(self):
        return (list(self.order), {k: list(v) for k, v in self.ins.items()},
                {k: list(v) for k, v in self.succ.items()}, {k: list(v) for k, v in self.probs.items()})

    def restore(self, snap):
        self.order, self.ins, self.succ, self.probs = snap

    def new_id(self):
        return max(self.order) + 1

    def weights(self, bid):
        s = self.succ[bid]
        if len(s) > 1:
            return list(self.probs[bid])
        return [1.0] * len(s)

    def set_succ(self, bid, succ, weights):
        # merge duplicate targets, keep first-seen order
        merged = {}
        for t, w in zip(succ, weights):
            merged[t] = merged.get(t, 0.0) + w
        self.succ[bid] = list(merged)
        if len(merged) > 1:
            total = sum(merged.values())
            self.probs[bid] = [w / total if total else 1.0 / len(merged) for w in merged.values()]
        else:
            self.probs.pop(bid, None)

    def reachable(self):
        seen = {self.entry}
        stack = [self.entry]
        while stack:
            for s in self.succ[stack.pop()]:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return seen

    def can_terminate(self):
        """Every reachable block has a path to an exit, so walks end."""
        reach = self.reachable()
        preds = {b: [] for b in self.order}
        for b in self.order:
            for s in self.succ[b]:
                preds[s].append(b)
        good = {b for b in self.order if not self.succ[b]}
        stack = list(good)
        while stack:
            for p in preds[stack.pop()]:
                if p not in good:
                    good.add(p)
                    stack.append(p)
        return reach <= good

    def build(self):
        blocks = []
        offset = 0
        for bid in self.order:
            ins = self.ins[bid]
            blocks.append(BasicBlock(bid, tuple(ins), offset, tuple(self.succ[bid])))
            offset += 4 * len(ins)
        return FunctionCfg(self.name, tuple(blocks), self.entry)


def mutate(binary: BinaryCfg, m: MutationConfig, tables=None) -> MutationResult:
    """Apply random edits block by block; ``tables`` are carried along if given."""
    tables = tables or {}
    pool = opcode_pool(m.opcode_pool_size)
    donors = list(binary.functions)
    out, log, new_tables = [], [], {}
    for i, fn in enumerate(binary.functions):
        rng = SplitMix64(derive_seed(m.seed, i))
        w = _Fn(fn, tables.get(fn.name, {}))
        if m.rate > 0:
            for bid in list(w.order):
                if bid not in w.ins or not rng.chance(m.rate):
                    continue
                kind = rng.choice(m.kinds)
                snap = w.snapshot()
                detail = _APPLY[kind](w, bid, rng, pool, donors, i)
                if detail is not None and not w.can_terminate():
                    w.restore(snap)
                    detail = None
                log.append({
                    "function": fn.name,
                    "block": bid,
                    "kind": kind,
                    "applied": detail is not None,
                    "detail": detail or "",
                })
        out.append(w.build() if m.rate > 0 else fn)
        new_tables[fn.name] = w.probs
    return MutationResult(BinaryCfg(tuple(out)), log, new_tables)


def _operand_change(w, bid, rng, pool, donors, fidx):
    cands = [k for k, ins in enumerate(w.ins[bid]) if ins.operands and ins.kind in _HASHED]
    if not cands:
        return None
    k = rng.choice(cands)
    ins = w.ins[bid][k]
    j = rng.below(len(ins.operands))
    choices = [r for r in REGISTERS if r != ins.operands[j]]
    new = rng.choice(choices)
    ops = ins.operands[:j] + (new,) + ins.operands[j + 1:]
    w.ins[bid][k] = Instruction(ins.opcode, ops, ins.kind)
    return f"instr {k} operand {j}: {ins.operands[j]} -> {new}"


def _opcode_change(w, bid, rng, pool, donors, fidx):
    cands = [k for k, ins in enumerate(w.ins[bid]) if ins.kind == "normal"]
    if not cands or len(pool) < 2:
        return None
    k = rng.choice(cands)
    ins = w.ins[bid][k]
    new = rng.choice([op for op in pool if op != ins.opcode])
    w.ins[bid][k] = Instruction(new, ins.operands, ins.kind)
    return f"instr {k}: {ins.opcode} -> {new}"


def _nop_insert(w, bid, rng, pool, donors, fidx):
    k = rng.below(len(w.ins[bid]) + 1)
    w.ins[bid].insert(k, Instruction("nop", (), "nop"))
    return f"nop at {k}"


def _split_after(w, bid, new, ins_tail):
    w.ins[new] = ins_tail
    w.succ[new] = w.succ[bid]
    if bid in w.probs:
        w.probs[new] = w.probs.pop(bid)
    w.succ[bid] = [new]
    w.order.insert(w.order.index(bid) + 1, new)


def _block_insert(w, bid, rng, pool, donors, fidx):
    new = w.new_id()
    ins = w.ins[bid]
    if len(ins) >= 2:
        k = rng.randint(1, len(ins) - 1)
        w.ins[bid] = ins[:k]
        _split_after(w, bid, new, ins[k:])
        return f"split at {k} into {new}"
    _split_after(w, bid, new, [random_instruction(rng, pool)])
    return f"appended block {new}"


def _block_delete(w, bid, rng, pool, donors, fidx):
    if bid == w.entry:
        return None
    succ = [s for s in w.succ[bid] if s != bid]
    sw = [x for s, x in zip(w.succ[bid], w.weights(bid)) if s != bid]
    for p in w.order:
        if p == bid or bid not in w.succ[p]:
            continue
        new_succ, new_w = [], []
        for s, x in zip(w.succ[p], w.weights(p)):
            if s == bid:
                total = sum(sw) or 1.0
                new_succ += succ
                new_w += [x * y / total for y in sw]
            else:
                new_succ.append(s)
                new_w.append(x)
        w.set_succ(p, new_succ, new_w)
        if not w.succ[p] and w.ins[p][-1].kind == "conditional-branch":
            w.ins[p][-1] = Instruction("ret", (), "return")
    w.order.remove(bid)
    del w.ins[bid], w.succ[bid]
    w.probs.pop(bid, None)
    return f"deleted {bid}"


def _branch_retarget(w, bid, rng, pool, donors, fidx):
    s = w.succ[bid]
    if not s:
        return None
    reach = sorted(w.reachable())
    targets = [t for t in reach if t not in s and t != w.entry]
    if not targets:
        return None
    j = rng.below(len(s))
    t = rng.choice(targets)
    old = s[j]
    new_succ = s[:j] + [t] + s[j + 1:]
    w.set_succ(bid, new_succ, w.weights(bid))
    return f"successor {old} -> {t}"


def _inline_duplicate(w, bid, rng, pool, donors, fidx):
    ins = w.ins[bid]
    calls = [k for k, x in enumerate(ins) if x.kind == "call"]
    if not calls or len(donors) < 2:
        return None
    k = rng.choice(calls)
    donor = donors[rng.below(len(donors) - 1)]
    if donor.name == w.name:
        donor = donors[-1]
    start = rng.below(len(donor.blocks))
    seg = donor.blocks[start:start + rng.randint(1, 3)]
    head, tail = ins[:k + 1], ins[k + 1:]
    w.ins[bid] = head
    cur = bid
    copies = []
    for b in seg:
        body = [x for x in b.instructions if x.kind in ("normal", "call", "pseudo", "nop")]
        if not body:
            body = [Instruction("nop", (), "nop")]
        new = w.new_id()
        _split_after(w, cur, new, body)
        copies.append(new)
        cur = new
    if tail:
        # remaining instructions keep the original block's terminator
        new = w.new_id()
        _split_after(w, cur, new, tail)
    return f"inlined {donor.name}[{start}:{start + len(seg)}] as {copies}"


_APPLY = {
    "operand-change": _operand_change,
    "opcode-change": _opcode_change,
    "nop-insert": _nop_insert,
    "block-insert": _block_insert,
    "block-delete": _block_delete,
    "branch-retarget": _branch_retarget,
    "inline-duplicate": _inline_duplicate,
}
