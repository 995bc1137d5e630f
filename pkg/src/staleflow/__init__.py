"""Reuse stale execution profiles on a newer binary.

Blocks of an old profile are paired with blocks of the new control-flow graph
through a hierarchy of hashes, then the missing counts are filled in by a
minimum-cost flow that keeps every function flow-consistent.
"""

from .cfg import (
    BasicBlock,
    BinaryCfg,
    CfgFormatError,
    FunctionCfg,
    Instruction,
    format_cfg,
    parse_cfg,
    reachable_blocks,
    read_cfg,
    validate,
    validate_binary,
    write_cfg,
)
from .hashing import (
    BlendedHash,
    blended_hash,
    blended_hashes,
    function_hash,
    hash64,
    loose_hash,
    neighbor_hash,
    strict_hash,
)
from .inference import FlowFunction, InferenceParams, infer
from .matcher import (
    BlockMatch,
    FunctionMatch,
    InitialCounts,
    assign_initial_counts,
    match_blocks,
    match_functions,
    staleness,
)
from .metrics import MetricsReport, edge_overlap, evaluate, reorder_blocks, tsp_score, tsp_value
from .pipeline import InvariantViolation, PipelineResult, exact_only, run_pipeline
from .profile import (
    BlockProfile,
    FunctionProfile,
    ProfileError,
    ProfileFile,
    SuccessorRecord,
    load_profile,
    profile_from_execution,
    read_profile,
    save_profile,
    write_profile,
)

__version__ = "0.1.0"
