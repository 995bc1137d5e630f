"""Carry a profile across a small code change and fill in the blocks it never saw.

The old function is a diamond. In the new build a second diamond hangs off
the left arm, so three blocks have no samples and the function hash differs.
"""

from collections import Counter

from staleflow import BinaryCfg, FunctionProfile, ProfileFile, SuccessorRecord, BlockProfile, parse_cfg
from staleflow.hashing import blended_hashes, function_hash
from staleflow.pipeline import infer_function, run_pipeline

OLD = """function work
block 0 offset 0
instr normal cmp r1 $0
instr conditional-branch je .L2
succ 1 2
block 1 offset 8
instr normal add r2 r1
succ 3
block 2 offset 16
instr normal sub r2 r1
succ 3
block 3 offset 24
instr normal ret
end
"""

NEW = """function work
block 0 offset 0
instr normal cmp r1 $0
instr conditional-branch je .L2
succ 1 2
block 1 offset 8
instr normal add r2 r1
instr normal test r2 r2
instr conditional-branch jz .L5
succ 4 5
block 2 offset 20
instr normal sub r2 r1
succ 3
block 3 offset 28
instr normal ret
block 4 offset 32
instr normal shl r2 $1
succ 6
block 5 offset 36
instr normal shr r2 $1
succ 6
block 6 offset 40
instr normal or r2 $1
succ 3
end
"""


def old_profile(cfg):
    hashes = blended_hashes(cfg)
    execs = {0: 400, 1: 300, 2: 100, 3: 400}
    succ = {0: [SuccessorRecord(1, 300), SuccessorRecord(2, 100)], 1: [SuccessorRecord(3, 300)],
            2: [SuccessorRecord(3, 100)], 3: []}
    blocks = tuple(BlockProfile(b.id, hashes[b.id].packed64, execs[b.id], tuple(succ[b.id])) for b in cfg.blocks)
    return FunctionProfile(cfg.name, function_hash(cfg), 400, len(cfg.blocks), blocks)


def main():
    old = parse_cfg(OLD).functions[0]
    new = parse_cfg(NEW).functions[0]
    prof = old_profile(old)
    print(f"function hash old={function_hash(old):016x} new={function_hash(new):016x}")

    out, matches, _ = infer_function(prof, new)
    print("\nblock pairing:")
    for m in matches:
        print(f"  profile block {m.profile_bid} -> cfg block {m.cfg_bid} ({m.level})")
    print("  levels:", dict(Counter(m.level for m in matches)))

    print("\ninferred counts:")
    for b in out.blocks:
        succ = ", ".join(f"{s.bid}:{s.cnt}" for s in b.succ) or "-"
        print(f"  block {b.bid}: exec={b.exec:<4} succ {succ}")

    res = run_pipeline(BinaryCfg((new,)), ProfileFile((prof,)))
    print("\n" + res.summary())


if __name__ == "__main__":
    main()
