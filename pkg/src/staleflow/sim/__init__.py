from .generate import GenConfig, generate_binary, simulate_profile, walk_counts
from .mutate import KINDS, MutationConfig, MutationResult, mutate
from .rng import SplitMix64, derive_seed
from .scenario import Scenario, make_scenario, write_scenario
