"""``atab`` command line.

Exit code 1 means UNSAFE (check) or an automaton/oracle disagreement
(oracle-diff).  Exit code 2 means a usage or input error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .ata import serialize
from .builders import WIDGETS, build_widget
from .check import check
from .diff import oracle_diff
from .forest import ForestError, build_forest
from .tree import CheckConfig, TreeError, parse_tree

MAX_CORPUS_NODES = 12


class UsageError(Exception):
    pass


def _csv(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def load_config(locks: int, labels: str = "", pairs: str = "") -> CheckConfig:
    """Build a configuration from raw command-line flag values."""
    parsed = []
    for item in _csv(pairs):
        parts = item.split(":")
        if len(parts) != 2 or not all(parts):
            raise UsageError(f"pair {item!r} must look like A:B")
        parsed.append((parts[0], parts[1]))
    try:
        return CheckConfig(locks, tuple(_csv(labels)), tuple(parsed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atab",
        description="Alternating tree automata for pairwise reachability of action trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p):
        p.add_argument("--locks", type=int, default=0, help="number of locks k (locks are 1..k)")
        p.add_argument("--labels", default="", help="comma-separated label names")
        p.add_argument("--pairs", default="", help="comma-separated label pairs such as A:B,B:B")

    p = sub.add_parser("build", help="build and serialize an automaton")
    config_flags(p)
    p.add_argument("--widget", default="full", help=f"one of {', '.join(WIDGETS)}")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = sub.add_parser(
        "check",
        help="decide whether a tree is safe",
        description="Print SAFE or UNSAFE and one line per forest constituent naming the widgets "
                    "that accept it. For UNSAFE trees a witness schedule is taken from the "
                    "exhaustive oracle, since it reads more easily than the automaton run.",
    )
    config_flags(p)
    p.add_argument("tree", help="tree file ('-' for stdin)")

    p = sub.add_parser("forest", help="write the action forest of a tree")
    config_flags(p)
    p.add_argument("tree", help="tree file ('-' for stdin)")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = sub.add_parser("oracle-diff", help="compare automata with the oracle on all small trees")
    config_flags(p)
    p.add_argument("--max-nodes", type=int, default=7, help=f"largest tree size (at most {MAX_CORPUS_NODES})")
    p.add_argument("--no-widgets", action="store_true", help="only compare the full automaton")
    p.add_argument("--no-forests", action="store_true", help="skip the forest comparison")

    sub.add_parser("version", help="print the version")
    return parser


def _read_tree(path: str, config: CheckConfig):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_tree(text, config)
    except TreeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _run(args) -> int:
    if args.command == "version":
        print(f"atab {__version__}")
        return 0
    config = load_config(args.locks, args.labels, args.pairs)
    if args.command == "build":
        try:
            automaton = build_widget(args.widget, config)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        _write(serialize(automaton), args.output)
        return 0
    if args.command == "forest":
        tree = _read_tree(args.tree, config)
        try:
            forest = build_forest(tree, config)
        except ForestError as exc:
            raise UsageError(str(exc)) from None
        _write(str(forest) + "\n", args.output)
        return 0
    if args.command == "check":
        tree = _read_tree(args.tree, config)
        try:
            report = check(tree, config)
        except ForestError as exc:
            raise UsageError(str(exc)) from None
        print("\n".join(report.lines()))
        return 0 if report.safe else 1
    # oracle-diff
    if not 1 <= args.max_nodes <= MAX_CORPUS_NODES:
        raise UsageError(f"--max-nodes must be between 1 and {MAX_CORPUS_NODES}")
    start = time.perf_counter()
    report = oracle_diff(config, args.max_nodes, widgets=not args.no_widgets,
                         forests=not args.no_forests, stop_at_first=True)
    print(report.summary())
    print(f"elapsed {time.perf_counter() - start:.1f}s")
    if report.disagreements:
        print(f"first disagreement: {report.disagreements[0]}")
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(args)
    except UsageError as exc:
        print(f"atab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
