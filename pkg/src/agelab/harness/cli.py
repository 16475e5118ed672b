"""Command-line entry point: ``agelab {run,plot,sweep,bench,verify}``."""

from __future__ import annotations

import argparse
import re
import subprocess
import sys
from pathlib import Path

from ..trainer import ConfigError
from .config import load_config
from .experiments import run_experiment
from .plotting import emit_plot


def _load(path: str, expect: str | None = None):
    cfg = load_config(path)
    if expect is not None and cfg.kind != expect:
        raise ConfigError(f"{path} names experiment {cfg.name!r}, expected a {expect} experiment")
    return cfg


def cmd_run(args) -> int:
    print(run_experiment(_load(args.config)))
    return 0


def cmd_sweep(args) -> int:
    print(run_experiment(_load(args.config, "tabular-sweep")))
    return 0


def cmd_bench(args) -> int:
    print(run_experiment(_load(args.config, "resilience")))
    return 0


def cmd_plot(args) -> int:
    info = emit_plot(args.csv, args.spec, args.out)
    print(info.path)
    return 0


_RESULT_RE = re.compile(r"^(\S+::\S+)\s+(PASSED|FAILED|ERROR|SKIPPED|XFAIL|XPASS)")


def cmd_verify(args) -> int:
    """Run the property/oracle suite (acceptance runs excluded) and tabulate outcomes."""
    tests = Path(args.tests)
    cmd = [sys.executable, "-m", "pytest", "-v", "-rN", "-p", "no:cacheprovider", str(tests)]
    if not args.include_acceptance:
        cmd += ["--ignore", str(tests / "test_acceptance.py")]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    rows = []
    for line in proc.stdout.splitlines():
        m = _RESULT_RE.match(line)
        if m:
            rows.append((m.group(1), m.group(2)))
    width = max((len(name) for name, _ in rows), default=4)
    print(f"{'test'.ljust(width)}  result")
    print(f"{'-' * width}  ------")
    for name, result in rows:
        print(f"{name.ljust(width)}  {'pass' if result == 'PASSED' else result.lower()}")
    failed = sum(r in ("FAILED", "ERROR") for _, r in rows)
    print(f"\n{len(rows) - failed}/{len(rows)} passed")
    return 0 if proc.returncode == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the experiment named in a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run a tabular-sweep config")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("bench", help="run a resilience:<victim> config")
    p.add_argument("config")
    p.set_defaults(func=cmd_bench)
    p = sub.add_parser("plot", help="render an SVG from a CSV log")
    p.add_argument("csv")
    p.add_argument("spec", help="x:y1,y2[@window], e.g. episode:reward@100")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_plot)
    p = sub.add_parser("verify", help="run the invariant and oracle tests, print a table")
    p.add_argument("--tests", default=str(Path(__file__).resolve().parents[3] / "tests"))
    p.add_argument("--include-acceptance", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
