"""Random reducible CFGs and random-walk execution profiles."""

from __future__ import annotations

from dataclasses import dataclass

from ..cfg import BasicBlock, BinaryCfg, FunctionCfg, Instruction
from ..profile import ProfileFile, profile_from_execution
from .rng import SplitMix64, derive_seed

OPCODES = (
    "mov", "add", "sub", "lea", "cmp", "test", "and", "or", "xor", "shl",
    "shr", "imul", "movzx", "movsx", "push", "pop", "inc", "dec", "neg", "not",
    "sar", "adc", "sbb", "cmov", "setcc", "bt", "xchg", "div", "idiv", "mul",
)
REGISTERS = tuple(f"r{i}" for i in range(16))
CONDITIONS = ("je", "jne", "jl", "jle", "jg", "jge", "jb", "ja")
MAX_WALK_STEPS = 100_000
MAX_LOOP_DEPTH = 3


@dataclass(frozen=True)
class GenConfig:
    seed: int = 1
    n_functions: int = 200
    blocks_per_function: tuple[int, int] = (1, 30)
    loop_probability: float = 0.15
    branch_probability: float = 0.35
    opcode_pool_size: int = 24
    walks: int = 50
    call_probability: float = 0.15

    def __post_init__(self):
        lo, hi = self.blocks_per_function
        if not 1 <= lo <= hi:
            raise ValueError("blocks_per_function must be a non-empty range of positive sizes")
        for name in ("loop_probability", "branch_probability", "call_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_functions < 1 or self.opcode_pool_size < 1 or self.walks < 1:
            raise ValueError("n_functions, opcode_pool_size and walks must be positive")


def opcode_pool(size: int) -> tuple[str, ...]:
    if size <= len(OPCODES):
        return OPCODES[:size]
    return OPCODES + tuple(f"op{i}" for i in range(size - len(OPCODES)))


def function_name(i: int) -> str:
    return f"fn{i:05d}"


def random_instruction(rng: SplitMix64, pool) -> Instruction:
    nops = rng.below(3)
    operands = []
    for _ in range(nops):
        operands.append(rng.choice(REGISTERS) if rng.chance(0.8) else f"${rng.below(256)}")
    return Instruction(rng.choice(pool), tuple(operands), "normal")


class _Builder:
    def __init__(self, rng, config, names):
        self.rng = rng
        self.config = config
        self.pool = opcode_pool(config.opcode_pool_size)
        self.names = names
        self.order = []  # block ids in layout order
        self.ins = {}
        self.succ = {}
        self.probs = {}

    def block(self):
        bid = len(self.order)
        self.order.append(bid)
        rng = self.rng
        body = [random_instruction(rng, self.pool) for _ in range(rng.randint(1, 5))]
        if self.names and rng.chance(self.config.call_probability):
            body.insert(rng.below(len(body) + 1), Instruction("call", (rng.choice(self.names),), "call"))
        if rng.chance(0.1):
            body.insert(0, Instruction(".cfi", ("remember_state",), "pseudo"))
        self.ins[bid] = body
        self.succ[bid] = []
        return bid

    def branch(self, bid, targets, probs):
        self.ins[bid].append(Instruction(self.rng.choice(CONDITIONS), (), "conditional-branch"))
        self.succ[bid] = list(targets)
        self.probs[bid] = list(probs)

    def jump(self, src, dst):
        self.succ[src] = [dst]
        if self.rng.chance(0.5):
            self.ins[src].append(Instruction("jmp", (), "unconditional-branch"))

    def region(self, budget, depth=0):
        """Build a single-entry single-exit region of exactly ``budget`` blocks."""
        rng, cfg = self.rng, self.config
        if budget >= 3 and depth < MAX_LOOP_DEPTH and rng.chance(cfg.loop_probability):
            head = self.block()
            bh, bt = self.region(budget - 2, depth + 1)
            tail = self.block()
            stay = rng.uniform(0.3, 0.8)
            self.branch(head, (bh, tail), (stay, 1.0 - stay))
            self.jump(bt, head)
            return head, tail
        if budget >= 3 and rng.chance(cfg.branch_probability):
            head = self.block()
            taken = rng.uniform(0.02, 0.98)
            if budget >= 4 and rng.chance(0.5):
                left = rng.randint(1, budget - 3)
                th, tt = self.region(left, depth)
                eh, et = self.region(budget - 2 - left, depth)
                join = self.block()
                self.branch(head, (th, eh), (taken, 1.0 - taken))
                self.jump(tt, join)
                self.jump(et, join)
            else:
                th, tt = self.region(budget - 2, depth)
                join = self.block()
                self.branch(head, (th, join), (taken, 1.0 - taken))
                self.jump(tt, join)
            return head, join
        if budget >= 2:
            first = rng.randint(1, budget - 1)
            ah, at = self.region(first, depth)
            bh, bt = self.region(budget - first, depth)
            self.succ[at] = [bh]
            return ah, bt
        b = self.block()
        return b, b

    def finish(self, name):
        _, tail = self.region(self.rng.randint(*self.config.blocks_per_function))
        self.ins[tail].append(Instruction("ret", (), "return"))
        blocks = []
        offset = 0
        for bid in self.order:
            blocks.append(BasicBlock(bid, tuple(self.ins[bid]), offset, tuple(self.succ[bid])))
            offset += 4 * len(self.ins[bid])
        return FunctionCfg(name, tuple(blocks), 0), dict(self.probs)


def generate_function(rng: SplitMix64, name: str, config: GenConfig, callees=()):
    return _Builder(rng, config, list(callees)).finish(name)


def generate_binary(config: GenConfig):
    """Return ``(binary, tables)``; ``tables[name][bid]`` are successor probabilities."""
    names = [function_name(i) for i in range(config.n_functions)]
    functions, tables = [], {}
    for i, name in enumerate(names):
        rng = SplitMix64(derive_seed(config.seed, i))
        fn, probs = generate_function(rng, name, config, names)
        functions.append(fn)
        tables[name] = probs
    return BinaryCfg(tuple(functions)), tables


def walk_counts(fn: FunctionCfg, probs, walks: int, rng: SplitMix64):
    """Run ``walks`` random walks from the entry; returns (block counts, jump counts)."""
    blocks = fn.block_map()
    succ = {b.id: b.successors for b in fn.blocks}
    for bid, s in succ.items():
        if len(s) > 1 and bid not in probs:
            raise ValueError(f"{fn.name}: no branch probabilities for block {bid}")
    bc = dict.fromkeys(blocks, 0)
    jc = {}
    for _ in range(walks):
        cur = fn.entry
        for _ in range(MAX_WALK_STEPS):
            bc[cur] += 1
            s = succ[cur]
            if not s:
                break
            nxt = s[0] if len(s) == 1 else s[rng.weighted(probs[cur])]
            jc[(cur, nxt)] = jc.get((cur, nxt), 0) + 1
            cur = nxt
    return bc, jc


def simulate_profile(binary: BinaryCfg, tables, walks: int, seed: int) -> ProfileFile:
    out = []
    for i, fn in enumerate(binary.functions):
        rng = SplitMix64(derive_seed(seed, i))
        bc, jc = walk_counts(fn, tables.get(fn.name, {}), walks, rng)
        out.append(profile_from_execution(fn, bc, jc))
    return ProfileFile(tuple(out))
