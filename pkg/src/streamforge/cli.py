"""Command line: ``streamforge run [engine flags] "<task>"`` and ``streamforge list``."""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from .engine import EngineConfig, EngineError, Mode
from .evaluation import ConfigurationError, csv_header, run_prequential, write_report
from .registry import LEARNERS, STREAMS, TASK_FLAGS, UnknownComponent, make_task
from .taskspec import TASK_NAMES, TaskParseError, parse_task

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

log = logging.getLogger("streamforge")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamforge", description="Distributed streaming learners on a local topology engine.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a task string")
    r.add_argument("-mode", choices=["det", "par"], default="det", help="deterministic single process, or parallel workers")
    r.add_argument("-workers", type=int, default=4, help="worker processes in par mode")
    r.add_argument("-seed", type=int, default=0, help="seed for generators without their own -r and for shuffle routing")
    r.add_argument("-o", dest="out", type=Path, default=Path("results"), help="output directory for CSV and PNG")
    r.add_argument("-timing", choices=["on", "off"], default=None, help="wall-clock columns (default: off in det mode, on in par mode)")
    r.add_argument("-lookahead", type=int, default=0, help="det mode: queued events allowed before the next source poll")
    r.add_argument("-v", dest="verbose", action="store_true", help="debug logging")
    r.add_argument("task", help="task string, e.g. 'PrequentialEvaluation -l (VAMR -p 2) -s (WaveformGenerator)'")
    sub.add_parser("list", help="list tasks, learners and streams")
    return p


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-")


def output_name(task, seed: int, mode: str) -> str:
    learner = task.flags["l"]
    stream = task.flags["s"]
    lname = learner.name if hasattr(learner, "name") else learner
    sname = stream.name if hasattr(stream, "name") else stream
    return f"{_slug(lname.rsplit('.', 1)[-1])}_{_slug(sname.rsplit('.', 1)[-1])}_{mode}_seed{seed}.csv"


def cmd_run(args) -> int:
    try:
        spec = parse_task(args.task)
    except TaskParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    timing = args.timing == "on" if args.timing else args.mode == "par"
    try:
        task = make_task(spec, seed=args.seed, timing=timing)
        engine = EngineConfig(
            mode=Mode.DETERMINISTIC if args.mode == "det" else Mode.PARALLEL,
            workers=args.workers,
            seed=args.seed,
            lookahead=args.lookahead,
        )
    except UnknownComponent as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_prequential(task, engine)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as e:
        print(f"error: engine failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    csv_path = args.out / output_name(spec, args.seed, args.mode)
    png = write_report(result, csv_path, title=args.task)
    print(csv_header(result.metric_names))
    print(result.final.csv())
    print(f"wrote {csv_path} and {png}", file=sys.stderr)
    return EXIT_OK


def cmd_list() -> int:
    print("tasks:")
    for t in TASK_NAMES:
        print(f"  {t}")
        for f, doc in TASK_FLAGS.items():
            print(f"      -{f:<8} {doc}")
    for title, table in (("learners", LEARNERS), ("streams", STREAMS)):
        print(f"{title}:")
        for name, entry in table.items():
            print(f"  {name:<24} {entry.summary}")
            for f, doc in entry.flags.items():
                print(f"      -{f:<8} {doc}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        return cmd_list()
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
