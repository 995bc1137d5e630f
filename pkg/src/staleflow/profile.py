"""Profile files: a fixed-schema, canonically ordered YAML subset.

Canonical form::

    functions:
      - name: "foo"
        fhash: "1f2e3d4c5b6a7988"
        exec: 10
        nblocks: 2
        blocks:
          - bid: 0
            hash: "00000a1b2c3d4e5f"
            exec: 10
            succ: [ { bid: 1, cnt: 10 } ]
          - bid: 1
            hash: "0004a1b2c3d4e5f6"
            exec: 10
            succ: []

The entry block of a function profile is the one with the lowest ``bid``.
Jump counts live only on the source block's ``succ`` list; a CFG edge with
no record has an unknown count, not a zero one.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Mapping

from .cfg import FunctionCfg
from .hashing import blended_hashes, function_hash

MAX_COUNT = (1 << 63) - 1


class ProfileError(ValueError):
    pass


class ProfileSyntaxError(ProfileError):
    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ProfileSchemaError(ProfileError):
    def __init__(self, path, rule):
        super().__init__(f"{path}: {rule}")
        self.path = path
        self.rule = rule


@dataclass(frozen=True)
class SuccessorRecord:
    bid: int
    cnt: int


@dataclass(frozen=True)
class BlockProfile:
    bid: int
    hash: int
    exec: int
    succ: tuple[SuccessorRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "succ", tuple(sorted(self.succ, key=lambda s: s.bid)))


@dataclass(frozen=True)
class FunctionProfile:
    name: str
    fhash: int
    exec: int
    nblocks: int
    blocks: tuple[BlockProfile, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(sorted(self.blocks, key=lambda b: b.bid)))

    @property
    def entry(self) -> int:
        return self.blocks[0].bid

    def total_exec(self) -> int:
        return sum(b.exec for b in self.blocks)

    def edge_counts(self) -> dict[tuple[int, int], int]:
        return {(b.bid, s.bid): s.cnt for b in self.blocks for s in b.succ}


@dataclass(frozen=True)
class ProfileFile:
    functions: tuple[FunctionProfile, ...] = ()

    def __post_init__(self):
        if not isinstance(self.functions, tuple):
            object.__setattr__(self, "functions", tuple(self.functions))

    def by_name(self) -> dict[str, FunctionProfile]:
        return {f.name: f for f in self.functions}


def check_profile(p: ProfileFile) -> None:
    """Raise ProfileSchemaError on the first invariant violation."""
    names = set()
    for i, fp in enumerate(p.functions):
        path = f"functions[{i}]"
        if fp.name in names:
            raise ProfileSchemaError(f"{path}.name", f"duplicate function name {fp.name!r}")
        names.add(fp.name)
        for key in ("fhash", "exec", "nblocks"):
            _check_range(f"{path}.{key}", getattr(fp, key), 64 if key == "fhash" else 63)
        if fp.nblocks < 1:
            raise ProfileSchemaError(f"{path}.nblocks", "must be positive")
        if fp.nblocks != len(fp.blocks):
            raise ProfileSchemaError(
                f"{path}.nblocks", f"is {fp.nblocks} but {len(fp.blocks)} blocks listed"
            )
        bids = set()
        for j, bp in enumerate(fp.blocks):
            bpath = f"{path}.blocks[{j}]"
            _check_range(f"{bpath}.bid", bp.bid, 63)
            _check_range(f"{bpath}.hash", bp.hash, 64)
            _check_range(f"{bpath}.exec", bp.exec, 63)
            if bp.bid in bids:
                raise ProfileSchemaError(f"{bpath}.bid", f"duplicate bid {bp.bid}")
            bids.add(bp.bid)
        for j, bp in enumerate(fp.blocks):
            seen = set()
            for k, s in enumerate(bp.succ):
                spath = f"{path}.blocks[{j}].succ[{k}]"
                _check_range(f"{spath}.cnt", s.cnt, 63)
                if s.bid not in bids:
                    raise ProfileSchemaError(f"{spath}.bid", f"unknown bid {s.bid}")
                if s.bid in seen:
                    raise ProfileSchemaError(f"{spath}.bid", f"duplicate successor {s.bid}")
                seen.add(s.bid)


def _check_range(path, value, bits):
    if not isinstance(value, int) or value < 0:
        raise ProfileSchemaError(path, "must be a non-negative integer")
    if value >= 1 << bits:
        raise ProfileSchemaError(path, f"exceeds {bits}-bit range")


# -- writing ------------------------------------------------------------------


def _yaml_printable(c: str) -> bool:
    o = ord(c)
    return (
        0x20 <= o <= 0x7E or 0xA0 <= o <= 0xD7FF and o not in (0x2028, 0x2029)
        or 0xE000 <= o <= 0xFFFD or 0x10000 <= o <= 0x10FFFF
    )


def _quote(s: str) -> str:
    # a string both JSON and YAML read back the same: escape what YAML
    # forbids raw or would fold as a line break
    text = json.dumps(s, ensure_ascii=False)
    return "".join(c if _yaml_printable(c) else f"\\u{ord(c):04x}" for c in text)


def format_profile(p: ProfileFile) -> str:
    if not p.functions:
        return "functions: []\n"
    out = ["functions:"]
    for fp in p.functions:
        out.append(f"  - name: {_quote(fp.name)}")
        out.append(f'    fhash: "{fp.fhash:016x}"')
        out.append(f"    exec: {fp.exec}")
        out.append(f"    nblocks: {fp.nblocks}")
        out.append("    blocks:")
        for bp in fp.blocks:
            out.append(f"      - bid: {bp.bid}")
            out.append(f'        hash: "{bp.hash:016x}"')
            out.append(f"        exec: {bp.exec}")
            if bp.succ:
                items = ", ".join(f"{{ bid: {s.bid}, cnt: {s.cnt} }}" for s in bp.succ)
                out.append(f"        succ: [ {items} ]")
            else:
                out.append("        succ: []")
    return "\n".join(out) + "\n"


def write_profile(p: ProfileFile) -> bytes:
    return format_profile(p).encode("utf-8")


def save_profile(p: ProfileFile, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_profile(p))


# -- reading ------------------------------------------------------------------

_LINE = re.compile(r"^( *)(- )?([A-Za-z_]+):(?: (.*))?$")
_UINT = re.compile(r"0|[1-9][0-9]*")
_HEX16 = re.compile(r'"([0-9a-fA-F]{16})"')
_SUCC_ITEM = re.compile(r"\{([^{}]*)\}")

FUNCTION_KEYS = ("name", "fhash", "exec", "nblocks", "blocks")
BLOCK_KEYS = ("bid", "hash", "exec", "succ")


class _Line:
    __slots__ = ("no", "indent", "item", "key", "value", "vcol")

    def __init__(self, no, text):
        m = _LINE.match(text)
        if m is None:
            col = len(text) - len(text.lstrip(" ")) + 1
            raise ProfileSyntaxError("expected 'key: value'", no, col)
        self.no = no
        self.indent = len(m.group(1))
        self.item = m.group(2) is not None
        self.key = m.group(3)
        self.value = (m.group(4) or "").rstrip()
        self.vcol = m.start(4) + 1 if m.group(4) is not None else len(text) + 1


def read_profile(source) -> ProfileFile:
    """Parse a profile from bytes, str, or a binary/text stream."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ProfileSyntaxError(f"invalid UTF-8: {e.reason}", 1) from None
    lines = []
    for no, text in enumerate(source.split("\n"), 1):
        if not text.strip() or text.lstrip().startswith("#"):
            continue
        if "\t" in text:
            raise ProfileSyntaxError("tab character", no, text.index("\t") + 1)
        lines.append(_Line(no, text))
    if not lines:
        raise ProfileSyntaxError("empty document", 1)
    head = lines[0]
    if head.indent or head.item or head.key != "functions":
        raise ProfileSchemaError("<root>", "expected top-level key 'functions'")
    functions = []
    pos = 1
    if head.value == "[]":
        if len(lines) > 1:
            raise ProfileSyntaxError("content after 'functions: []'", lines[1].no)
    elif head.value:
        raise ProfileSyntaxError("expected list after 'functions:'", head.no, head.vcol)
    while pos < len(lines):
        path = f"functions[{len(functions)}]"
        fields, pos = _mapping(lines, pos, 2, path, FUNCTION_KEYS)
        fields = _function_fields(fields, path, lines)
        blocks = []
        blk = fields.pop("blocks")
        if blk is not None:
            ln = blk
            if ln.value == "[]":
                pass
            elif ln.value:
                raise ProfileSyntaxError("expected list after 'blocks:'", ln.no, ln.vcol)
            else:
                while pos < len(lines) and lines[pos].indent == 6 and lines[pos].item:
                    bpath = f"{path}.blocks[{len(blocks)}]"
                    bfields, pos = _mapping(lines, pos, 6, bpath, BLOCK_KEYS)
                    blocks.append(_block(bfields, bpath))
        functions.append(FunctionProfile(blocks=tuple(blocks), **fields))
    p = ProfileFile(tuple(functions))
    check_profile(p)
    return p


def load_profile(path) -> ProfileFile:
    with open(path, "rb") as fh:
        return read_profile(fh.read())


def _mapping(lines, pos, indent, path, keys):
    """Collect one list item's 'key: value' lines; returns ({key: _Line}, next pos)."""
    first = lines[pos]
    if first.indent != indent or not first.item:
        raise ProfileSyntaxError(f"expected list item at indentation {indent}", first.no, first.indent + 1)
    fields = {first.key: first}
    pos += 1
    inner = indent + 2
    last = first
    while pos < len(lines):
        ln = lines[pos]
        if ln.item or ln.indent != inner:
            nested = last.key == "blocks" and not last.value and ln.indent > inner
            if ln.indent >= inner and not nested:
                raise ProfileSyntaxError("unexpected indentation", ln.no, ln.indent + 1)
            break
        last = ln
        if ln.key in fields:
            raise ProfileSchemaError(f"{path}.{ln.key}", "duplicate key")
        fields[ln.key] = ln
        pos += 1
    for k in fields:
        if k not in keys:
            raise ProfileSchemaError(f"{path}.{k}", "unknown key")
    for k in keys:
        if k not in fields:
            raise ProfileSchemaError(f"{path}.{k}", "missing key")
    return fields, pos


def _function_fields(fields, path, lines):
    name_ln = fields["name"]
    try:
        name = json.loads(name_ln.value)
    except ValueError:
        name = None
    if not isinstance(name, str) or not name_ln.value.startswith('"'):
        raise ProfileSyntaxError("expected double-quoted string", name_ln.no, name_ln.vcol)
    return {
        "name": name,
        "fhash": _hex(fields["fhash"], f"{path}.fhash"),
        "exec": _uint(fields["exec"].value, fields["exec"], f"{path}.exec"),
        "nblocks": _uint(fields["nblocks"].value, fields["nblocks"], f"{path}.nblocks"),
        "blocks": fields["blocks"],
    }


def _block(fields, path):
    return BlockProfile(
        bid=_uint(fields["bid"].value, fields["bid"], f"{path}.bid"),
        hash=_hex(fields["hash"], f"{path}.hash"),
        exec=_uint(fields["exec"].value, fields["exec"], f"{path}.exec"),
        succ=_succ(fields["succ"], f"{path}.succ"),
    )


def _uint(text, ln, path):
    text = text.strip()
    if _UINT.fullmatch(text):
        value = int(text)
        if value > MAX_COUNT:
            raise ProfileSchemaError(path, "exceeds 63-bit range")
        return value
    if re.fullmatch(r"-[0-9]+", text):
        raise ProfileSchemaError(path, "must be non-negative")
    raise ProfileSyntaxError(f"expected unsigned integer, got {text!r}", ln.no, ln.vcol)


def _hex(ln, path):
    m = _HEX16.fullmatch(ln.value)
    if m is None:
        raise ProfileSyntaxError('expected "<16 hex digits>"', ln.no, ln.vcol)
    return int(m.group(1), 16)


def _succ(ln, path):
    text = ln.value
    if not (text.startswith("[") and text.endswith("]")):
        raise ProfileSyntaxError("expected flow list '[ ... ]'", ln.no, ln.vcol)
    body = text[1:-1]
    records = []
    last = 0
    for k, m in enumerate(_SUCC_ITEM.finditer(body)):
        gap = body[last:m.start()].strip()
        if gap not in ("", ",") or (k == 0 and gap):
            raise ProfileSyntaxError("malformed successor list", ln.no, ln.vcol + 1 + last)
        last = m.end()
        item = {}
        for pair in m.group(1).split(","):
            key, sep, val = pair.partition(":")
            key = key.strip()
            if not sep:
                raise ProfileSyntaxError("expected 'key: value'", ln.no, ln.vcol + 1 + m.start())
            if key not in ("bid", "cnt"):
                raise ProfileSchemaError(f"{path}[{k}].{key}", "unknown key")
            if key in item:
                raise ProfileSchemaError(f"{path}[{k}].{key}", "duplicate key")
            item[key] = _uint(val, ln, f"{path}[{k}].{key}")
        for key in ("bid", "cnt"):
            if key not in item:
                raise ProfileSchemaError(f"{path}[{k}].{key}", "missing key")
        records.append(SuccessorRecord(item["bid"], item["cnt"]))
    if body[last:].strip():
        raise ProfileSyntaxError("malformed successor list", ln.no, ln.vcol + 1 + last)
    return tuple(records)


# -- construction from execution counts ---------------------------------------


def profile_from_execution(
    cfg: FunctionCfg,
    block_counts: Mapping[int, int],
    jump_counts: Mapping[tuple[int, int], int],
) -> FunctionProfile:
    """Build a profile record for ``cfg`` from measured counts.

    Blocks absent from ``block_counts`` get exec 0; only jumps present in
    ``jump_counts`` get a successor record.
    """
    blocks = cfg.block_map()
    if cfg.entry != min(blocks):
        raise ValueError(f"{cfg.name}: entry block must carry the lowest id")
    for bid in block_counts:
        if bid not in blocks:
            raise ValueError(f"{cfg.name}: unknown block id {bid}")
    succ: dict[int, list[SuccessorRecord]] = {}
    for (u, v), cnt in jump_counts.items():
        if u not in blocks or v not in blocks[u].successors:
            raise ValueError(f"{cfg.name}: unknown jump {u}->{v}")
        succ.setdefault(u, []).append(SuccessorRecord(v, int(cnt)))
    hashes = blended_hashes(cfg)
    records = tuple(
        BlockProfile(b.id, hashes[b.id].packed64, int(block_counts.get(b.id, 0)), tuple(succ.get(b.id, ())))
        for b in cfg.blocks
    )
    return FunctionProfile(
        name=cfg.name,
        fhash=function_hash(cfg),
        exec=int(block_counts.get(cfg.entry, 0)),
        nblocks=len(cfg.blocks),
        blocks=records,
    )
