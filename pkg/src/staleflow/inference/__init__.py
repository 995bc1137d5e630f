from .flow import (
    FlowFunction,
    InferenceParams,
    build_network,
    conservation_violations,
    cost,
    infer,
    objective,
    rebalance_unknown_subgraphs,
    subdivide_counted_edges,
)
from .mcf import UNBOUNDED, FlowNetwork, solve_min_cost_flow
