"""Synthetic ground truth: an old binary with its profile and a fresh profile of the new one."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

from ..cfg import BinaryCfg, write_cfg
from ..profile import ProfileFile, save_profile
from .generate import GenConfig, generate_binary, simulate_profile
from .mutate import MutationConfig, mutate
from .rng import derive_seed

OLD_PROFILE_STREAM = 1
FRESH_PROFILE_STREAM = 2


@dataclass
class Scenario:
    gen: GenConfig
    mutation: MutationConfig
    old_binary: BinaryCfg
    old_profile: ProfileFile
    new_binary: BinaryCfg
    fresh_profile: ProfileFile
    log: list

    def metadata(self) -> dict:
        return {
            "gen": asdict(self.gen),
            "mutation": asdict(self.mutation),
            "mutations": self.log,
        }


def make_scenario(gen: GenConfig, m: MutationConfig, out_dir=None) -> Scenario:
    """Generate the new binary, drift it backwards into the old one, profile both."""
    new_binary, tables = generate_binary(gen)
    mutated = mutate(new_binary, m, tables)
    old_seed = derive_seed(gen.seed ^ m.seed, OLD_PROFILE_STREAM)
    fresh_seed = derive_seed(gen.seed, FRESH_PROFILE_STREAM)
    sc = Scenario(
        gen=gen,
        mutation=m,
        old_binary=mutated.binary,
        old_profile=simulate_profile(mutated.binary, mutated.tables, gen.walks, old_seed),
        new_binary=new_binary,
        fresh_profile=simulate_profile(new_binary, tables, gen.walks, fresh_seed),
        log=mutated.log,
    )
    if out_dir is not None:
        write_scenario(sc, out_dir)
    return sc


def write_scenario(sc: Scenario, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_cfg(sc.old_binary, os.path.join(out_dir, "old.cfg"))
    write_cfg(sc.new_binary, os.path.join(out_dir, "new.cfg"))
    save_profile(sc.old_profile, os.path.join(out_dir, "old.prof"))
    save_profile(sc.fresh_profile, os.path.join(out_dir, "fresh.prof"))
    with open(os.path.join(out_dir, "scenario.json"), "w", encoding="utf-8") as fh:
        json.dump(sc.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")
