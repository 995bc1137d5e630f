"""Compare inferred profiles with simply dropping stale ones, as code drift grows."""

import argparse

from staleflow import InferenceParams
from staleflow.cli import bench_cell
from staleflow.sim import GenConfig, MutationConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--functions", type=int, default=200)
    args = ap.parse_args()
    print(f"{'rate':>5} {'stale':>6} {'overlap drop':>13} {'overlap infer':>14} {'tsp drop':>9} {'tsp infer':>10} {'p90 ms':>7}")
    for rate in (0.0, 0.02, 0.05, 0.10, 0.20, 0.40):
        row, samples = bench_cell(GenConfig(seed=args.seed, n_functions=args.functions),
                                  MutationConfig(seed=args.seed, rate=rate), InferenceParams())
        times = sorted(ms for _, ms in samples)
        p90 = times[int(0.9 * (len(times) - 1))] if times else 0.0
        print(f"{rate:>5.2f} {row['staleness']:>6.3f} {row['overlap_stale_baseline']:>13.3f} "
              f"{row['overlap_inferred']:>14.3f} {row['tsp_stale_baseline']:>9.3f} {row['tsp_inferred']:>10.3f} {p90:>7.2f}")


if __name__ == "__main__":
    main()
