"""Show how the four block hash components react to different kinds of edits."""

from staleflow import BasicBlock, FunctionCfg, Instruction, blended_hash


def fields(instrs):
    blk = BasicBlock(0, tuple(instrs))
    return blended_hash(blk, FunctionCfg("f", (blk,)))


def show(label, instrs):
    h = fields(instrs)
    print(f"{label:<28} loose={h.loose16:04x} strict={h.strict16:04x} packed={h.hex()}")


def main():
    base = [Instruction("mov", ("r1", "r2")), Instruction("add", ("r1", "$4")), Instruction("cmp", ("r1", "r3"))]
    show("original", base)
    show("with nop and .loc", [Instruction(".loc", ("12",), "pseudo"), *base[:2], Instruction("nop", (), "nop"), base[2]])
    show("with trailing jmp", [*base, Instruction("jmp", (".L3",), "unconditional-branch")])
    show("operand edited", [base[0], Instruction("add", ("r1", "$8")), base[2]])
    show("instructions reordered", [base[1], base[0], base[2]])
    show("opcode replaced", [base[0], Instruction("sub", ("r1", "$4")), base[2]])
    print("\nCosmetic edits keep both digests; operand edits and reordering move only the strict one;")
    print("a new opcode moves both.")


if __name__ == "__main__":
    main()
