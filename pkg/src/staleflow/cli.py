"""Command-line entry point: ``staleflow <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import math
import sys
import time

from .cfg import CfgFormatError, read_cfg
from .hashing import blended_hashes
from .inference import InferenceParams
from .matcher import match_blocks, match_functions, staleness
from .metrics import evaluate
from .pipeline import InvariantViolation, exact_only, run_pipeline
from .profile import ProfileError, load_profile, save_profile
from .sim import KINDS, GenConfig, MutationConfig, make_scenario

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INVARIANT = 2

LEVELS = ("full", "strict", "loose", "entry-forced")
SIZE_BUCKETS = ((1, 10), (11, 50), (51, 200), (201, None))
BENCH_COLUMNS = (
    "seed",
    "mutation_rate",
    "staleness",
    "overlap_stale_baseline",
    "overlap_inferred",
    "tsp_stale_baseline",
    "tsp_inferred",
    "functions",
    "inferred_functions",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are input errors; status 2 is reserved for invariant violations
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class InputError(Exception):
    """Unreadable or malformed input; reported with the offending path."""


def _load_cfg(path):
    try:
        return read_cfg(path)
    except (OSError, CfgFormatError, UnicodeDecodeError) as e:
        raise InputError(f"{path}: {e}") from e


def _load_profile(path):
    try:
        return load_profile(path)
    except (OSError, ProfileError, UnicodeDecodeError) as e:
        raise InputError(f"{path}: {e}") from e


def _params(args) -> InferenceParams:
    if args.k_inc < 0 or args.k_dec < 0:
        raise InputError("--k-inc and --k-dec must be non-negative")
    return InferenceParams(k_inc=args.k_inc, k_dec=args.k_dec)


def _dump_json(doc, path, args) -> None:
    if args.stamp:
        doc = dict(doc, stamp=datetime.datetime.now(datetime.timezone.utc).isoformat())
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise InputError(f"{path}: {e}") from e


def _save(profile, path) -> None:
    try:
        save_profile(profile, path)
    except OSError as e:
        raise InputError(f"{path}: {e}") from e


def _say(args, msg) -> None:
    if not args.quiet:
        print(msg)


# -- commands ------------------------------------------------------------------


def cmd_hash(args) -> int:
    binary = _load_cfg(args.cfg)
    out = []
    for fn in binary.functions:
        hashes = blended_hashes(fn)
        for b in fn.blocks:
            out.append(f"{fn.name} {b.id} {hashes[b.id].packed64:016x}\n")
    sys.stdout.write("".join(out))
    return EXIT_OK


def match_report(binary, profile) -> dict:
    cfgs = binary.by_name()
    prof = profile.by_name()
    matches, discarded = match_functions(profile, binary)
    functions = []
    for m in matches:
        counts = dict.fromkeys(LEVELS, 0)
        for bm in match_blocks(prof[m.profile_name], cfgs[m.cfg_name]):
            counts[bm.level] += 1
        functions.append({
            "cfg_name": m.cfg_name,
            "exact": m.exact_profile,
            "kind": m.kind,
            "levels": counts,
            "profile_name": m.profile_name,
        })
    return {
        "discarded": sorted(discarded),
        "functions": functions,
        "staleness": staleness(profile, binary, matches),
    }


def cmd_match(args) -> int:
    binary = _load_cfg(args.cfg)
    profile = _load_profile(args.profile)
    _dump_json(match_report(binary, profile), args.report, args)
    return EXIT_OK


def cmd_infer(args) -> int:
    binary = _load_cfg(args.cfg)
    profile = _load_profile(args.profile)
    res = run_pipeline(binary, profile, _params(args), not args.no_rebalance, args.jobs, fast_path=False)
    _save(res.profile, args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    binary = _load_cfg(args.cfg)
    profile = _load_profile(args.profile)
    res = run_pipeline(binary, profile, _params(args), not args.no_rebalance, args.jobs)
    _save(res.profile, args.out)
    _say(args, res.summary())
    return EXIT_OK


def cmd_eval(args) -> int:
    binary = _load_cfg(args.cfg)
    inferred = _load_profile(args.inferred)
    fresh = _load_profile(args.fresh)
    stale = staleness(_load_profile(args.stale), binary) if args.stale else 0.0
    _dump_json(evaluate(inferred, fresh, binary, stale).to_dict(), args.report, args)
    return EXIT_OK


def _gen_config(args, seed) -> GenConfig:
    lo, hi = args.blocks
    if not 1 <= lo <= hi:
        raise InputError("--blocks needs 1 <= MIN <= MAX")
    if args.functions < 1 or args.walks < 1:
        raise InputError("--functions and --walks must be positive")
    return GenConfig(seed=seed, n_functions=args.functions, blocks_per_function=(lo, hi), walks=args.walks)


def _mutation_config(seed, rate, kinds) -> MutationConfig:
    try:
        return MutationConfig(seed=seed, rate=rate, kinds=kinds)
    except ValueError as e:
        raise InputError(str(e)) from e


def cmd_simulate(args) -> int:
    gen = _gen_config(args, args.seed)
    mseed = args.seed if args.mutation_seed is None else args.mutation_seed
    m = _mutation_config(mseed, args.mutation_rate, args.kinds)
    try:
        sc = make_scenario(gen, m, args.out_dir)
    except OSError as e:
        raise InputError(f"{args.out_dir}: {e}") from e
    applied = sum(1 for e in sc.log if e["applied"])
    _say(args, f"wrote {args.out_dir}: functions={gen.n_functions} mutations={applied}")
    return EXIT_OK


def _percentile(sorted_values, p):
    # nearest rank
    k = max(1, math.ceil(p * len(sorted_values)))
    return sorted_values[k - 1]


def _bucket(n):
    for lo, hi in SIZE_BUCKETS:
        if n >= lo and (hi is None or n <= hi):
            return f"{lo}-{hi}" if hi else f"{lo}+"
    return "0"


def runtime_table(samples) -> dict:
    """Per size bucket: count, p50, p90, p99 and max of inference time in ms."""
    by = {}
    for nblocks, ms in samples:
        by.setdefault(_bucket(nblocks), []).append(ms)
    table = {}
    for key, vals in by.items():
        vals.sort()
        table[key] = {
            "count": len(vals),
            "max": round(vals[-1], 3),
            "p50": round(_percentile(vals, 0.5), 3),
            "p90": round(_percentile(vals, 0.9), 3),
            "p99": round(_percentile(vals, 0.99), 3),
        }
    return table


def bench_cell(gen: GenConfig, m: MutationConfig, params, rebalance=True, jobs=1):
    """One (seed, rate) cell: baseline and inferred quality against the fresh profile."""
    sc = make_scenario(gen, m)
    res = run_pipeline(sc.new_binary, sc.old_profile, params, rebalance, jobs)
    base = evaluate(exact_only(sc.old_profile, sc.new_binary), sc.fresh_profile, sc.new_binary, res.staleness)
    got = evaluate(res.profile, sc.fresh_profile, sc.new_binary, res.staleness)
    row = {
        "functions": len(sc.new_binary.functions),
        "inferred_functions": res.n_inferred,
        "mutation_rate": m.rate,
        "overlap_inferred": got.edge_overlap,
        "overlap_stale_baseline": base.edge_overlap,
        "seed": gen.seed,
        "staleness": res.staleness,
        "tsp_inferred": got.tsp_score,
        "tsp_stale_baseline": base.tsp_score,
    }
    samples = [(o.profile.nblocks, o.runtime_ms) for o in res.outcomes if o.inferred]
    return row, samples


def run_bench(seeds, rates, args, params, rebalance=True, jobs=1):
    rows, samples = [], []
    for seed in seeds:
        gen = _gen_config(args, seed)
        for rate in rates:
            row, s = bench_cell(gen, _mutation_config(seed, rate, args.kinds), params, rebalance, jobs)
            rows.append(row)
            samples += s
    return rows, samples


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in BENCH_COLUMNS})
    return buf.getvalue()


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    rows, samples = run_bench(args.seeds, args.rates, args, _params(args), not args.no_rebalance, args.jobs)
    doc = {"rows": rows}
    if not args.no_timing:
        doc["runtime_ms"] = runtime_table(samples)
    _dump_json(doc, args.json, args)
    if args.csv:
        try:
            with open(args.csv, "w", encoding="utf-8", newline="") as fh:
                fh.write(bench_csv(rows))
        except OSError as e:
            raise InputError(f"{args.csv}: {e}") from e
    if args.json not in (None, "-"):
        _say(args, f"{len(rows)} cells in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _int_list(text):
    """'1-20' or '1,3,5' or a mix such as '1-3,7'."""
    out = []
    for part in filter(None, text.split(",")):
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list: {text!r}") from None
    return out


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list: {text!r}") from None


def _kinds(text):
    kinds = tuple(k for k in text.split(",") if k)
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown mutation kinds {bad}; choose from {','.join(KINDS)}")
    return kinds


def _blocks(text):
    lo, _, hi = text.partition(",")
    try:
        return int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {text!r}") from None


def _global_flags(p, suppress=False):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--jobs", type=int, default=d(1), help="worker processes for per-function work")
    p.add_argument("--k-inc", type=int, default=d(1), help="penalty per unit of count increase")
    p.add_argument("--k-dec", type=int, default=d(2), help="penalty per unit of count decrease")
    p.add_argument("--no-rebalance", action="store_true", default=d(False), help="skip even redistribution")
    p.add_argument("--quiet", action="store_true", default=d(False), help="suppress progress output")
    p.add_argument("--stamp", action="store_true", default=d(False), help="add a timestamp to JSON reports")


def _sim_flags(p):
    p.add_argument("--functions", type=int, default=200)
    p.add_argument("--blocks", type=_blocks, default=(1, 30), metavar="MIN,MAX", help="blocks per function")
    p.add_argument("--walks", type=int, default=50, help="simulated executions per function")
    p.add_argument("--kinds", type=_kinds, default=KINDS, help="comma-separated mutation kinds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="staleflow", description=__doc__)
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = command("hash", cmd_hash, "print the blended hash of every block")
    p.add_argument("--cfg", required=True)

    p = command("match", cmd_match, "report function and block matches")
    p.add_argument("--cfg", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--report", default="-", help="JSON output path (default stdout)")

    p = command("infer", cmd_infer, "infer counts for every matched function")
    p.add_argument("--cfg", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--out", required=True)

    p = command("pipeline", cmd_pipeline, "pass exact profiles through, infer stale ones")
    p.add_argument("--cfg", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--out", required=True)

    p = command("eval", cmd_eval, "score an inferred profile against a fresh one")
    p.add_argument("--cfg", required=True)
    p.add_argument("--inferred", required=True)
    p.add_argument("--fresh", required=True)
    p.add_argument("--stale", help="stale profile, used only for the staleness figure")
    p.add_argument("--report", default="-", help="JSON output path (default stdout)")

    p = command("simulate", cmd_simulate, "write a synthetic old/new scenario")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--mutation-seed", type=int, help="defaults to --seed")
    p.add_argument("--mutation-rate", type=float, default=0.05)
    p.add_argument("--out-dir", required=True)
    _sim_flags(p)

    p = command("bench", cmd_bench, "quality of inference against the discard baseline")
    p.add_argument("--seeds", type=_int_list, default=_int_list("1-20"), help="e.g. 1-20 or 1,4,9")
    p.add_argument("--rates", type=_float_list, default=[0.02, 0.05, 0.10, 0.20], help="comma-separated rates")
    p.add_argument("--json", default="-", help="JSON output path (default stdout)")
    p.add_argument("--csv", help="also write the rows as CSV")
    p.add_argument("--no-timing", action="store_true", help="omit runtime percentiles, for byte-stable output")
    _sim_flags(p)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_INPUT
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
