"""Command-line entry point: ``toproute <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .bench import GeneratorConfig, generate_map, generate_queries, run_bench
from .errors import CapExceededError, InputError, RouteError
from .index import FeatureIndex, build_feature_index, build_hop_index, load_hop_index, save_hop_index
from .model import load_map, map_to_dict, validate_map
from .query import load_queries, retrieve_subindices, save_queries
from .search import ALGORITHMS, Caps, result_to_dict, solve

log = logging.getLogger("toproute")

DEFAULT_SECONDS = 60.0
DEFAULT_MEMORY = 2 * 1024**3


def fi_path(idx_path: str) -> str:
    """Where ``index`` puts the feature index next to the label file."""
    return idx_path + ".features.json"


def _caps(args) -> Caps:
    mem = None if args.mem_cap is None or args.mem_cap < 0 else int(args.mem_cap)
    secs = None if args.time_cap is None or args.time_cap < 0 else args.time_cap
    return Caps(seconds=secs, memory_bytes=mem)


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=1) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_validate(args) -> int:
    m = load_map(args.map)
    problems = validate_map(m)
    for p in problems:
        print(p)
    if problems:
        return InputError.exit_code
    print(f"ok: {len(m.pois)} POIs, {len(m.edges)} edges, {len(m.features)} features")
    return 0


def cmd_index(args) -> int:
    m = load_map(args.map)
    problems = validate_map(m)
    if problems:
        raise InputError("; ".join(problems))
    hi = build_hop_index(m)
    save_hop_index(hi, args.output)
    _write_json(build_feature_index(m).to_dict(), fi_path(args.output))
    print(f"wrote {args.output}: {hi.size} labels")
    return 0


def cmd_gen_map(args) -> int:
    cfg = GeneratorConfig(
        poi_count=args.pois,
        edge_density=args.density,
        feature_count=args.features,
        stay_mean=args.stay_mean,
        stay_stddev=args.stay_stddev,
        beta=args.beta,
        seed=args.seed,
        directed=args.directed,
    )
    _write_json(map_to_dict(generate_map(cfg)), args.output)
    return 0


def cmd_gen_queries(args) -> int:
    m = load_map(args.map)
    qs = generate_queries(
        m, args.count, args.b, theta=args.theta, alpha=args.alpha, k=args.k, seed=args.seed,
        x=args.x, y=args.y, kind=args.kind, max_features=args.max_features,
    )
    if args.output in (None, "-"):
        _write_json([q.to_dict() for q in qs], None)
    else:
        save_queries(qs, args.output)
    return 0


def cmd_query(args) -> int:
    m = load_map(args.map)
    hi = load_hop_index(args.index)
    try:
        with open(fi_path(args.index), encoding="utf-8") as fh:
            fi = FeatureIndex.from_dict(json.load(fh))
    except FileNotFoundError:
        fi = build_feature_index(m)
    queries = load_queries(args.query)
    caps = _caps(args)
    out = []
    for q in queries:
        if args.k is not None:
            q = q.replace(k=args.k)
        cands = retrieve_subindices(m, fi, hi, q)
        results, stats = solve(cands, args.algo, caps=caps)
        out.append(result_to_dict(args.algo, results, stats))
    _write_json(out[0] if len(out) == 1 else out, args.output)
    return 0


def cmd_bench(args) -> int:
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    report = run_bench(args.map, args.queries, algos, caps=_caps(args), csv_out=args.csv, json_out=args.json)
    if args.csv is None:
        sys.stdout.write(report.to_csv())
    return 0


def _add_caps(p: argparse.ArgumentParser) -> None:
    p.add_argument("--time-cap", type=float, default=DEFAULT_SECONDS, help="seconds per query; negative disables")
    p.add_argument("--mem-cap", type=float, default=DEFAULT_MEMORY, help="RSS bytes; negative disables")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toproute", description="Top-k budgeted routes over POI maps.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a map file")
    p.add_argument("map")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("index", help="build the label and feature indices")
    p.add_argument("map")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("gen-map", help="write a seeded synthetic map")
    p.add_argument("--pois", type=int, default=100)
    p.add_argument("--density", type=float, default=0.05, help="edge probability per POI pair")
    p.add_argument("--features", type=int, default=8)
    p.add_argument("--stay-mean", type=float, default=90.0)
    p.add_argument("--stay-stddev", type=float, default=15.0)
    p.add_argument("--beta", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--directed", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_map)

    p = sub.add_parser("gen-queries", help="write a seeded query batch for a map")
    p.add_argument("map")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--kind", default="power_law", choices=["power_law", "log", "coverage"])
    p.add_argument("-k", type=int, default=1)
    p.add_argument("--x", type=int)
    p.add_argument("--y", type=int)
    p.add_argument("--max-features", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_queries)

    p = sub.add_parser("query", help="answer one query file")
    p.add_argument("map")
    p.add_argument("index")
    p.add_argument("query")
    p.add_argument("--algo", default="pacer2", choices=ALGORITHMS)
    p.add_argument("-k", type=int, help="override k from the query file")
    p.add_argument("-o", "--output")
    _add_caps(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="run algorithms over a query batch")
    p.add_argument("map")
    p.add_argument("queries")
    p.add_argument("--algos", default="pacer2,pacer-sc,greedy", help="comma-separated")
    p.add_argument("--csv")
    p.add_argument("--json")
    _add_caps(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return exc.exit_code
    except RouteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
