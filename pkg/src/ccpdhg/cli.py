"""Command-line entry point: ``ccpdhg solve``, ``ccpdhg bench``, ``ccpdhg generate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import emit_report, run_benchmark
from .generate import random_lp
from .kkt import Tolerances
from .lp import to_standard_form
from .mps import read_mps, write_mps
from .pdhg import PdhgConfig
from .race import BASELINE, CONCURRENT, SOLVED, TIME_LIMIT, RaceConfig, RaceOutcome, run_race
from .simplex import STATUS_NAMES, write_basis

EXIT_OK, EXIT_TIME_LIMIT, EXIT_NUMERICAL, EXIT_INPUT = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which here means "time limit"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[BASELINE, CONCURRENT], default=None)
    p.add_argument("--eps-rel", type=float, default=1e-6)
    p.add_argument("--eps-cross", type=float, default=1e-2)
    p.add_argument("--eps-abs", type=float, default=1e-6)
    p.add_argument("--decrement", type=float, default=0.1)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--threads", type=int, default=None, help="cores to plan for (default: all)")
    p.add_argument("--time-limit", type=float, default=3600.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-every", type=int, default=0, help="PDHG log line every N iterations (0: off)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccpdhg", description="PDHG with concurrent crossover.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one MPS model")
    s.add_argument("model")
    _solver_flags(s)
    s.add_argument("--write-basis", metavar="FILE")
    s.add_argument("--write-solution", metavar="FILE")
    s.add_argument("--events", metavar="FILE", help="write the race event log as JSON lines")
    s.add_argument("--json", action="store_true", help="print the outcome as JSON")

    b = sub.add_parser("bench", help="run both modes over a directory of MPS models")
    b.add_argument("dir")
    _solver_flags(b)
    b.add_argument("--shift", type=float, default=1.0)
    b.add_argument("--out", metavar="report.json")
    b.add_argument("--csv", metavar="report.csv")

    g = sub.add_parser("generate", help="write random feasible LPs as MPS files")
    g.add_argument("dir")
    g.add_argument("--count", type=int, default=5)
    g.add_argument("--rows", type=int, default=20)
    g.add_argument("--cols", type=int, default=30)
    g.add_argument("--density", type=float, default=0.3)
    g.add_argument("--seed", type=int, default=0)
    return parser


def race_config(args, mode: str) -> RaceConfig:
    tol = Tolerances(eps_rel=args.eps_rel, eps_abs=args.eps_abs, eps_cross=args.eps_cross, decrement=args.decrement)
    return RaceConfig(
        tolerances=tol,
        workers=args.workers,
        mode=mode,
        time_limit=args.time_limit,
        seed=args.seed,
        available_cores=args.threads,
        pdhg=PdhgConfig(log_every=args.log_every, seed=args.seed),
    )


def exit_code(out: RaceOutcome) -> int:
    if out.status == SOLVED:
        return EXIT_OK
    if out.status == TIME_LIMIT:
        return EXIT_TIME_LIMIT
    return EXIT_NUMERICAL


def solution_text(lp, out: RaceOutcome) -> str:
    lines = [f"objective {out.objective!r}"]
    for name, value, st in zip(lp.col_names, out.x, out.column_status):
        lines.append(f"{name} {float(value)!r} {STATUS_NAMES[int(st)]}")
    return "\n".join(lines) + "\n"


def _err(msg: str) -> None:
    print(f"ccpdhg: {msg}", file=sys.stderr)


def cmd_solve(args) -> int:
    try:
        lp = read_mps(args.model)
        cfg = race_config(args, args.mode or CONCURRENT)
    except (OSError, ValueError) as err:
        _err(str(err))
        return EXIT_INPUT
    log = (lambda line: print(line, file=sys.stderr)) if args.log_every else None
    events = open(args.events, "w") if args.events else None

    def on_event(ev):
        events.write(json.dumps(ev, sort_keys=True) + "\n")
        events.flush()

    try:
        out = run_race(lp, cfg, on_event=on_event if events else None, log=log)
    finally:
        if events:
            events.close()
    if out.solved:
        if args.write_solution:
            Path(args.write_solution).write_text(solution_text(lp, out))
        if args.write_basis:
            Path(args.write_basis).write_text(write_basis(to_standard_form(lp).lp, out.result.basis))
    if args.json:
        print(json.dumps(out.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"status     {out.status}")
        if out.solved:
            print(f"objective  {out.objective!r}")
            print(f"winner     {out.winner}")
            print(f"violation  {out.result.violation:.3e}")
            print(f"pivots     {out.result.pivots}")
        print(f"pdhg       {out.pdhg_stop_reason} after {out.pdhg_iterations} iterations")
        print(f"time       {out.wall_time:.3f} s")
    return exit_code(out)


def cmd_bench(args) -> int:
    try:
        base = race_config(args, BASELINE)
        conc = race_config(args, CONCURRENT)
    except ValueError as err:
        _err(str(err))
        return EXIT_INPUT

    def progress(rec):
        print(f"{rec.model}\t{rec.mode}\t{rec.status}\t{rec.wall_time:.3f}", file=sys.stderr)

    try:
        summary = run_benchmark(args.dir, base, conc, shift=args.shift, progress=progress)
    except FileNotFoundError as err:
        _err(str(err))
        return EXIT_INPUT
    report = emit_report(summary, "json")
    if args.out:
        Path(args.out).write_bytes(report)
    if args.csv:
        Path(args.csv).write_bytes(emit_report(summary, "csv"))
    if not args.out:
        sys.stdout.write(report.decode())
    else:
        print(f"ratio {summary.ratio:.3f}  wins {summary.wins}  losses {summary.losses}  ties {summary.ties}")
    return EXIT_OK


def cmd_generate(args) -> int:
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        lp = random_lp(args.rows, args.cols, args.density, seed=args.seed + k)
        (out / f"{lp.name}.mps").write_text(write_mps(lp))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"solve": cmd_solve, "bench": cmd_bench, "generate": cmd_generate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
