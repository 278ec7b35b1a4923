"""Command-line driver: compile, simulate, report stats, or fuzz.

    uilc compile in.uil --pipeline SC -o out.uil
    uilc sim in.uil --data mem.json --cycle-limit 10000 --trace t.jsonl
    uilc stats in.uil --pipeline SH --data mem.json --json
    uilc fuzz --seed 7 --count 100

Exit status: 0 on success, 1 when the input has diagnostics, 2 when a
simulation fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .fuzz import run_fuzz
from .lower import PassConfig
from .opt import infer_static_with_warnings
from .pipeline import PASSES, PRESETS, preset_passes, run_pipeline, stats_of
from .sim import SimError, simulate
from .textio import ParseError, parse, print_program
from .validate import validate


def _load(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return parse(f.read(), path)


def _check(prog) -> int:
    diags = validate(prog)
    for d in diags:
        print(d, file=sys.stderr)
    return 1 if any(d.severity == "error" for d in diags) else 0


def _passes_from(args) -> list[str]:
    if args.passes:
        for p in args.passes:
            if p not in PASSES:
                raise SystemExit(f"unknown pass {p!r}; known: {', '.join(PASSES)}")
        return list(args.passes)
    name = args.pipeline or "B"
    if name not in PRESETS:
        raise SystemExit(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return preset_passes(name)


def _config_from(args) -> PassConfig:
    return PassConfig(
        promote_threshold=args.promote_threshold,
        promote_max_cycles=args.promote_max_cycles,
        while_fastpath=not args.no_while_fastpath,
    )


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pipeline", help="preset: " + ", ".join(PRESETS))
    p.add_argument("-p", dest="passes", action="append", default=[], help="explicit pass (repeatable)")
    p.add_argument("--promote-threshold", type=int, default=1)
    p.add_argument("--promote-max-cycles", type=int, default=4096)
    p.add_argument("--no-while-fastpath", action="store_true")
    p.add_argument("--emit", help="after:<pass> dumps the intermediate program to stdout")


def _emit_after(args) -> str | None:
    if not args.emit:
        return None
    if not args.emit.startswith("after:"):
        raise SystemExit("--emit expects after:<pass>")
    return args.emit.split(":", 1)[1]


def cmd_compile(args) -> int:
    prog = _load(args.input)
    rc = _check(prog)
    if rc:
        return rc
    _, warnings = infer_static_with_warnings(prog)
    for w in warnings:
        print(w, file=sys.stderr)
    result, snapshot = run_pipeline(prog, _passes_from(args), _config_from(args), _emit_after(args))
    if snapshot is not None:
        sys.stdout.write(print_program(snapshot))
    text = print_program(result)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text)
    elif snapshot is None:
        sys.stdout.write(text)
    return 0


def _read_data(path: str | None):
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def cmd_sim(args) -> int:
    prog = _load(args.input)
    rc = _check(prog)
    if rc:
        return rc
    try:
        trace = simulate(
            prog,
            entry=args.entry,
            data=_read_data(args.data),
            cycle_limit=args.cycle_limit,
            record_trace=args.trace is not None,
        )
    except SimError as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return 2
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(trace.dump_jsonl())
    out = {"cycles": trace.cycles}
    out.update(trace.final.as_json())
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_stats(args) -> int:
    prog = _load(args.input)
    rc = _check(prog)
    if rc:
        return rc
    result, _ = run_pipeline(prog, _passes_from(args), _config_from(args))
    cycles = None
    if args.data is not None or args.sim:
        try:
            cycles = simulate(
                result, data=_read_data(args.data), cycle_limit=args.cycle_limit, record_trace=False
            ).cycles
        except SimError as e:
            print(f"simulation error: {e}", file=sys.stderr)
            return 2
    report = stats_of(result, cycles)
    if args.json:
        json.dump(report.as_json(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        for k, v in report.as_json().items():
            print(f"{k}: {v}")
    return 0


def cmd_fuzz(args) -> int:
    extra = None
    if args.all_pipelines:
        extra = [preset_passes(p) for p in ("SH", "SC", "SH-SC", "SC-SH")]
    summary = run_fuzz(args.seed, args.count, extra)
    if summary.ok:
        print(f"{args.count} trials ok (seed {args.seed})")
        return 0
    for f in summary.failures[:20]:
        print(f"seed {f.seed}: {f.reason}", file=sys.stderr)
    print(f"{len(summary.failures)} of {args.count} trials failed", file=sys.stderr)
    return 2


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="uilc", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("compile", help="run a pass pipeline and print/write the result")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    _add_pipeline_flags(p)
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("sim", help="simulate a program as written")
    p.add_argument("input")
    p.add_argument("--data", help="memory/input initialization JSON")
    p.add_argument("--cycle-limit", type=int, default=1_000_000)
    p.add_argument("--trace", help="write a JSONL trace, one object per cycle")
    p.add_argument("--entry", help="entry component (default: main)")
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("stats", help="compile and report structural statistics")
    p.add_argument("input")
    p.add_argument("--data", help="simulate with this data and report cycles")
    p.add_argument("--sim", action="store_true", help="simulate even without data")
    p.add_argument("--cycle-limit", type=int, default=1_000_000)
    p.add_argument("--json", action="store_true")
    _add_pipeline_flags(p)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("fuzz", help="differential testing of promotion and lowering")
    p.add_argument("--seed", type=int, default=int(os.environ.get("UIL_SEED", "1")))
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--all-pipelines", action="store_true")
    p.set_defaults(fn=cmd_fuzz)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as e:
        print(e.diagnostic, file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
