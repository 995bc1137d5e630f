"""Control-flow graph model and its line-oriented text format.

A binary is a list of functions; each function is a list of basic blocks
whose first element is the entry. Exits are blocks without successors.

Text format, one file per binary::

    function <name>
    block <id> offset <offset>
    instr <kind> <opcode> [<operand> ...]
    succ <id> [<id> ...]
    end
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

KINDS = (
    "normal",
    "pseudo",
    "nop",
    "unconditional-branch",
    "conditional-branch",
    "call",
    "return",
)


class CfgFormatError(ValueError):
    """Raised when a CFG file cannot be parsed or violates an invariant."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Instruction:
    opcode: str
    operands: tuple[str, ...] = ()
    kind: str = "normal"

    def __post_init__(self):
        # tolerate lists passed by callers
        if not isinstance(self.operands, tuple):
            object.__setattr__(self, "operands", tuple(self.operands))


@dataclass(frozen=True)
class BasicBlock:
    id: int
    instructions: tuple[Instruction, ...] = ()
    offset: int = 0
    successors: tuple[int, ...] = ()

    def __post_init__(self):
        if not isinstance(self.instructions, tuple):
            object.__setattr__(self, "instructions", tuple(self.instructions))
        if not isinstance(self.successors, tuple):
            object.__setattr__(self, "successors", tuple(self.successors))


@dataclass(frozen=True)
class FunctionCfg:
    name: str
    blocks: tuple[BasicBlock, ...]
    entry: int | None = None

    def __post_init__(self):
        if not isinstance(self.blocks, tuple):
            object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.entry is None and self.blocks:
            object.__setattr__(self, "entry", self.blocks[0].id)

    def block(self, bid: int) -> BasicBlock:
        return self.block_map()[bid]

    def block_map(self) -> dict[int, BasicBlock]:
        # frozen dataclass: cache lazily through object.__setattr__
        cached = self.__dict__.get("_block_map")
        if cached is None:
            cached = {b.id: b for b in self.blocks}
            object.__setattr__(self, "_block_map", cached)
        return cached

    def edges(self) -> list[tuple[int, int]]:
        return [(b.id, s) for b in self.blocks for s in b.successors]

    def predecessors(self) -> dict[int, list[int]]:
        cached = self.__dict__.get("_preds")
        if cached is None:
            cached = {b.id: [] for b in self.blocks}
            for b in self.blocks:
                for s in b.successors:
                    if s in cached:
                        cached[s].append(b.id)
            object.__setattr__(self, "_preds", cached)
        return cached

    def exits(self) -> list[int]:
        return [b.id for b in self.blocks if not b.successors]


@dataclass(frozen=True)
class BinaryCfg:
    functions: tuple[FunctionCfg, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.functions, tuple):
            object.__setattr__(self, "functions", tuple(self.functions))

    def function(self, name: str) -> FunctionCfg:
        return self.by_name()[name]

    def by_name(self) -> dict[str, FunctionCfg]:
        cached = self.__dict__.get("_by_name")
        if cached is None:
            cached = {f.name: f for f in self.functions}
            object.__setattr__(self, "_by_name", cached)
        return cached


class Violation(NamedTuple):
    block: int | None
    rule: str

    def __str__(self):
        where = "function" if self.block is None else f"block {self.block}"
        return f"{where}: {self.rule}"


def validate(cfg: FunctionCfg) -> list[Violation]:
    """Check every structural invariant; an empty list means the CFG is ok."""
    out = []
    if not cfg.blocks:
        out.append(Violation(None, "no blocks"))
        return out
    ids = set()
    offsets = {}
    for b in cfg.blocks:
        if b.id < 0:
            out.append(Violation(b.id, "negative id"))
        if b.id in ids:
            out.append(Violation(b.id, "duplicate id"))
        ids.add(b.id)
        if b.offset < 0:
            out.append(Violation(b.id, "negative offset"))
        if b.offset in offsets:
            out.append(Violation(b.id, "duplicate offset"))
        offsets.setdefault(b.offset, b.id)
        for ins in b.instructions:
            out.extend(Violation(b.id, r) for r in _instruction_violations(ins))
    for b in cfg.blocks:
        if len(set(b.successors)) != len(b.successors):
            out.append(Violation(b.id, "duplicate successor"))
        for s in b.successors:
            if s not in ids:
                out.append(Violation(b.id, "dangling successor"))
    if cfg.entry not in ids:
        out.append(Violation(None, "missing entry"))
    return out


def _bad_token(tok: str) -> bool:
    # '#' starts a comment in the text format, so it cannot appear in a token
    return not tok or "#" in tok or any(c.isspace() for c in tok)


def _instruction_violations(ins: Instruction) -> Iterator[str]:
    if _bad_token(ins.opcode):
        yield "bad opcode"
    if ins.kind not in KINDS:
        yield f"unknown instruction kind {ins.kind!r}"
    if ins.kind == "nop" and ins.operands:
        yield "nop with operands"
    for op in ins.operands:
        if _bad_token(op):
            yield "bad operand"


def validate_binary(binary: BinaryCfg) -> list[tuple[str, Violation]]:
    out = []
    seen = set()
    for f in binary.functions:
        if f.name in seen:
            out.append((f.name, Violation(None, "duplicate function name")))
        seen.add(f.name)
        out.extend((f.name, v) for v in validate(f))
    return out


def reachable_blocks(cfg: FunctionCfg) -> set[int]:
    """Block ids reachable from the entry along directed edges."""
    blocks = cfg.block_map()
    seen = {cfg.entry}
    stack = [cfg.entry]
    while stack:
        for s in blocks[stack.pop()].successors:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


# -- text format --------------------------------------------------------------


def parse_cfg(text: str) -> BinaryCfg:
    functions = []
    name = None
    blocks: list[BasicBlock] = []
    cur = None  # [id, offset, instrs, succs]
    start_line = 0

    def close_block():
        nonlocal cur
        if cur is not None:
            blocks.append(BasicBlock(cur[0], tuple(cur[2]), cur[1], tuple(cur[3] or ())))
            cur = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "function":
            if name is not None:
                raise CfgFormatError("nested 'function' (missing 'end')", lineno)
            if len(parts) != 2:
                raise CfgFormatError("expected 'function <name>'", lineno)
            name, blocks, start_line = parts[1], [], lineno
        elif name is None:
            raise CfgFormatError(f"'{head}' outside of a function", lineno)
        elif head == "block":
            if len(parts) != 4 or parts[2] != "offset":
                raise CfgFormatError("expected 'block <id> offset <offset>'", lineno)
            close_block()
            cur = [_uint(parts[1], lineno), _uint(parts[3], lineno), [], None]
        elif head == "instr":
            if cur is None:
                raise CfgFormatError("'instr' before any 'block'", lineno)
            if cur[3] is not None:
                raise CfgFormatError("'instr' after 'succ'", lineno)
            if len(parts) < 3:
                raise CfgFormatError("expected 'instr <kind> <opcode> ...'", lineno)
            if parts[1] not in KINDS:
                raise CfgFormatError(f"unknown instruction kind {parts[1]!r}", lineno)
            cur[2].append(Instruction(parts[2], tuple(parts[3:]), parts[1]))
        elif head == "succ":
            if cur is None:
                raise CfgFormatError("'succ' before any 'block'", lineno)
            if cur[3] is not None:
                raise CfgFormatError("second 'succ' line for block", lineno)
            cur[3] = [_uint(p, lineno) for p in parts[1:]]
        elif head == "end":
            close_block()
            fn = FunctionCfg(name, tuple(blocks))
            problems = validate(fn)
            if problems:
                raise CfgFormatError(f"function {name}: {problems[0]}", start_line)
            functions.append(fn)
            name = None
        else:
            raise CfgFormatError(f"unknown directive {head!r}", lineno)
    if name is not None:
        raise CfgFormatError(f"function {name} not terminated by 'end'", start_line)
    binary = BinaryCfg(tuple(functions))
    dup = [v for v in validate_binary(binary) if v[1].rule == "duplicate function name"]
    if dup:
        raise CfgFormatError(f"duplicate function name {dup[0][0]!r}")
    return binary


def _uint(tok: str, lineno: int) -> int:
    if not tok.isdigit():
        raise CfgFormatError(f"expected non-negative integer, got {tok!r}", lineno)
    return int(tok)


def format_cfg(binary: BinaryCfg | Iterable[FunctionCfg]) -> str:
    functions = binary.functions if isinstance(binary, BinaryCfg) else binary
    lines = []
    for fn in functions:
        lines.append(f"function {fn.name}")
        # entry must come first in the file
        order = sorted(fn.blocks, key=lambda b: b.id != fn.entry)
        for b in order:
            lines.append(f"block {b.id} offset {b.offset}")
            for ins in b.instructions:
                lines.append(" ".join(("instr", ins.kind, ins.opcode) + ins.operands))
            if b.successors:
                lines.append("succ " + " ".join(map(str, b.successors)))
        lines.append("end")
    return "\n".join(lines) + "\n" if lines else ""


def read_cfg(path) -> BinaryCfg:
    with open(path, encoding="utf-8") as fh:
        return parse_cfg(fh.read())


def write_cfg(binary: BinaryCfg, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_cfg(binary))
