"""Basic-block hashes used to pair blocks across binary revisions.

Every digest is XXH64 with seed 0. A block gets four 16-bit components
packed high-to-low as ``offset | loose | strict | neighbor``:

* loose: distinct opcodes, sorted, joined by a space;
* strict: ``opcode(op1,op2)`` strings in program order, joined by ``\\n``;
* neighbor: sorted loose hashes of predecessors and of successors, as
  16-digit hex joined by ``,``, the two lists separated by ``|``.

Pseudo, nop and unconditional-branch instructions take no part in the
loose and strict hashes.
"""

from __future__ import annotations

from typing import NamedTuple

import xxhash

from .cfg import BasicBlock, FunctionCfg

MASK16 = 0xFFFF
MASK64 = (1 << 64) - 1
IGNORED_KINDS = frozenset({"pseudo", "nop", "unconditional-branch"})


def hash64(data: bytes | str) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return xxhash.xxh64_intdigest(data, seed=0)


def _hashed_instructions(block: BasicBlock):
    return [i for i in block.instructions if i.kind not in IGNORED_KINDS]


def loose_hash(block: BasicBlock) -> int:
    opcodes = sorted({i.opcode for i in _hashed_instructions(block)})
    return hash64(" ".join(opcodes))


def strict_hash(block: BasicBlock) -> int:
    parts = [f"{i.opcode}({','.join(i.operands)})" for i in _hashed_instructions(block)]
    return hash64("\n".join(parts))


def _neighbor_digest(pred_loose, succ_loose) -> int:
    preds = ",".join(f"{h:016x}" for h in sorted(pred_loose))
    succs = ",".join(f"{h:016x}" for h in sorted(succ_loose))
    return hash64(f"{preds}|{succs}")


def neighbor_hash(block: BasicBlock, cfg: FunctionCfg) -> int:
    blocks = cfg.block_map()
    preds = [loose_hash(blocks[p]) for p in cfg.predecessors()[block.id]]
    succs = [loose_hash(blocks[s]) for s in block.successors]
    return _neighbor_digest(preds, succs)


class BlendedHash(NamedTuple):
    offset16: int
    loose16: int
    strict16: int
    neighbor16: int

    @property
    def packed64(self) -> int:
        return (
            (self.offset16 << 48)
            | (self.loose16 << 32)
            | (self.strict16 << 16)
            | self.neighbor16
        )

    @classmethod
    def unpack(cls, value: int) -> "BlendedHash":
        if not 0 <= value <= MASK64:
            raise ValueError(f"not a 64-bit value: {value}")
        return cls(
            (value >> 48) & MASK16,
            (value >> 32) & MASK16,
            (value >> 16) & MASK16,
            value & MASK16,
        )

    def hex(self) -> str:
        return f"{self.packed64:016x}"


def blended_hash(block: BasicBlock, cfg: FunctionCfg) -> BlendedHash:
    return BlendedHash(
        block.offset & MASK16,
        loose_hash(block) & MASK16,
        strict_hash(block) & MASK16,
        neighbor_hash(block, cfg) & MASK16,
    )


def blended_hashes(cfg: FunctionCfg) -> dict[int, BlendedHash]:
    """Blended hash of every block; computes each loose hash once."""
    loose = {b.id: loose_hash(b) for b in cfg.blocks}
    preds = cfg.predecessors()
    out = {}
    for b in cfg.blocks:
        nb = _neighbor_digest([loose[p] for p in preds[b.id]], [loose[s] for s in b.successors])
        out[b.id] = BlendedHash(
            b.offset & MASK16, loose[b.id] & MASK16, strict_hash(b) & MASK16, nb & MASK16
        )
    return out


def function_hash(cfg: FunctionCfg) -> int:
    # strict hashes as 8-byte little-endian words, in block-list order
    data = b"".join(strict_hash(b).to_bytes(8, "little") for b in cfg.blocks)
    return hash64(data)
