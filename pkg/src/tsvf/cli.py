"""Command line front end.

    tsvf run CONFIG [--seed S] [--out PATH] [--format text|csv|jsonl] [--jobs K]
    tsvf validate CONFIG
    tsvf list-scenarios

CONFIG is a JSON file or the name of a built-in scenario.  Exit codes:
0 success, 1 validation failure, 2 runtime error or failed check.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, load_config, loads_config
from .report import FORMATS, emit_report, metadata, run

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def builtin_scenarios() -> dict[str, str]:
    """Name -> JSON text of every checked-in scenario config."""
    root = resources.files("tsvf") / "scenarios"
    return {
        p.name[: -len(".json")]: p.read_text()
        for p in sorted(root.iterdir(), key=lambda p: p.name)
        if p.name.endswith(".json")
    }


def resolve_config(target: str):
    if Path(target).exists():
        return load_config(target)
    builtins = builtin_scenarios()
    if target in builtins:
        return loads_config(builtins[target])
    raise ConfigError(f"no such file or built-in scenario: {target}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsvf", description="Two-state-vector scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config and print its report")
    p_run.add_argument("config", help="config path or built-in scenario name")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None, help="write the report here instead of stdout")
    p_run.add_argument("--format", choices=FORMATS, default="text")
    p_run.add_argument("--jobs", type=int, default=1, help="worker threads for sweep rows")

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")

    sub.add_parser("list-scenarios", help="list built-in scenario configs")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list-scenarios":
        for name, text in builtin_scenarios().items():
            raw = json.loads(text)
            print(f"{name}\t{raw['kind']}\t{raw.get('description', '')}")
        return EXIT_OK

    try:
        cfg = resolve_config(args.config)
        if args.command == "run" and args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        for note in cfg.notes:
            print(f"note: {note}")
        print(f"ok: {cfg.kind}")
        return EXIT_OK

    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    report = run(cfg, jobs=args.jobs)
    out = args.out or cfg.output
    try:
        data = emit_report(report, args.format, out)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if out is None:
        sys.stdout.write(data)
        print(metadata(report), file=sys.stderr)
    if report.error:
        print(f"scenario failed: {report.error}", file=sys.stderr)
        return EXIT_RUNTIME
    if not report.ok:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        print(f"checks failed: {failed}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
