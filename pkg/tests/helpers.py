"""Small builders shared by the tests."""

from staleflow.cfg import BasicBlock, BinaryCfg, FunctionCfg, Instruction, parse_cfg


def ins(text, kind="normal"):
    op, *operands = text.split()
    return Instruction(op, tuple(operands), kind)


def block(bid, body=("mov r1 r2",), succ=(), offset=None):
    instrs = tuple(x if isinstance(x, Instruction) else ins(x) for x in body)
    return BasicBlock(bid, instrs, bid * 16 if offset is None else offset, tuple(succ))


def graph(name, edges, n=None, bodies=None):
    """Function with blocks 0..n-1 (entry 0) and the given edges."""
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    succ = {i: [] for i in range(n)}
    for u, v in edges:
        succ[u].append(v)
    bodies = bodies or {}
    blocks = tuple(block(i, bodies.get(i, (f"op{i} r{i}",)), succ[i]) for i in range(n))
    return FunctionCfg(name, blocks)


def binary(*fns):
    return BinaryCfg(tuple(fns))


def one(text):
    return parse_cfg(text).functions[0]


# A function edited between releases: A, B and C keep their code, X changes,
# and C gains two new successors E and F in front of the shared exit Y.
OLD_FOO = """\
function foo
block 0 offset 0
instr normal push rbp
instr normal mov rbp rsp
succ 1
block 1 offset 8
instr normal cmp edi $0
instr conditional-branch jle
succ 2 3
block 2 offset 16
instr normal add eax ebx
instr normal imul eax $3
instr conditional-branch jg
succ 4
block 3 offset 28
instr normal sub eax ecx
succ 4
block 4 offset 32
instr normal pop rbp
instr return ret
end
"""

NEW_FOO = """\
function foo
block 0 offset 0
instr normal push rbp
instr normal mov rbp rsp
succ 1
block 1 offset 8
instr normal cmp edi $0
instr conditional-branch jle
succ 2 3
block 2 offset 16
instr normal add eax ebx
instr normal imul eax $3
instr conditional-branch jg
succ 5 6
block 3 offset 28
instr normal xor eax eax
instr normal shl eax $2
succ 4
block 4 offset 40
instr normal pop rbp
instr return ret
block 5 offset 48
instr normal lea rdx [rax+1]
succ 4
block 6 offset 56
instr normal neg eax
succ 4
end
"""


def foo_scenario():
    """(old cfg, new cfg, old profile) for the edited function above."""
    from staleflow.profile import ProfileFile, profile_from_execution

    old, new = one(OLD_FOO), one(NEW_FOO)
    counts = {0: 300, 1: 300, 2: 150, 3: 150, 4: 300}
    jumps = {(0, 1): 300, (1, 2): 150, (1, 3): 150, (2, 4): 150, (3, 4): 150}
    return old, new, ProfileFile((profile_from_execution(old, counts, jumps),))
