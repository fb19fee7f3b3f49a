"""``matslp`` command line: gen, run, summarize, replay.

Log verbosity comes from the ``MATSLP_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``...; default ``WARNING``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..grid import write_map
from ..mapgen import FAMILIES, MapSpec, make_instance
from ..world import Instance
from .config import SEARCH_KEYS, ConfigError, parse_config
from .runner import read_results, read_trace, replay, run_suite, summarize, write_summary


def _size(s: str) -> tuple[int, int]:
    w, _, h = s.lower().partition("x")
    return int(w), int(h or w)


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in args.seeds:
        spec = MapSpec(args.family, _size(args.size), args.density, seed)
        grid = spec.build()
        write_map(grid, out / f"{spec.map_id}.map")
        for n in args.agents:
            inst = make_instance(grid, n, args.family, seed, map_id=spec.map_id)
            inst.save(out / f"{spec.map_id}_n{n}.json")
        print(out / f"{spec.map_id}.map")
    return 0


def cmd_run(args) -> int:
    text = Path(args.config).read_text() if args.config else ""
    extra = [f"{k} = {v}" for k, v in (o.split("=", 1) for o in args.set)]
    config = parse_config("\n".join([text, *extra]))
    rows = run_suite(config)
    failed = [r for r in rows if r.status != "ok"]
    print(f"{len(rows)} rows in {config.output}; {len(failed)} failed")
    if args.summary:
        write_summary(summarize(rows), args.summary)
    return 1 if failed else 0


def cmd_summarize(args) -> int:
    summary = summarize(read_results(args.results))
    if args.out:
        write_summary(summary, args.out)
    for s in summary:
        print(f"{s.family:10s} n={s.n_agents:<4d} {s.solver:28s} runs={s.n_runs:<3d} "
              f"throughput={s.throughput_mean:.4f} [{s.ci_low:.4f}, {s.ci_high:.4f}] decision={s.decision_ms_mean:.2f}ms")
    return 0


def cmd_replay(args) -> int:
    problems = replay(read_trace(args.trace), Instance.load(args.instance))
    for p in problems:
        print(p)
    print("trace reproduced" if not problems else f"{len(problems)} mismatches")
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    from .config import parse_int_list

    p = argparse.ArgumentParser(prog="matslp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate maps and instances")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--size", default="20x20")
    g.add_argument("--density", type=float, default=0.0)
    g.add_argument("--seeds", type=parse_int_list, default=[0])
    g.add_argument("--agents", type=parse_int_list, default=[16])
    g.add_argument("--out", default="maps")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a benchmark suite")
    r.add_argument("--config", help="flat key = value config file")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help=f"override a config key (search keys: {', '.join(SEARCH_KEYS)})")
    r.add_argument("--summary", help="also write a summary CSV here")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("summarize", help="mean throughput with 95%% CI per group")
    s.add_argument("results")
    s.add_argument("--out")
    s.set_defaults(func=cmd_summarize)

    rp = sub.add_parser("replay", help="re-execute a trace and check it")
    rp.add_argument("trace")
    rp.add_argument("--instance", required=True)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("MATSLP_LOG", "WARNING").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
