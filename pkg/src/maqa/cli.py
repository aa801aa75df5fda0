"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 bad input, 3 resource or solver
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .generators import PollingParams, QueueParams, gen_polling, gen_queueing
from .gspn import DEFAULT_STATE_LIMIT, build_ma, parse_gspn
from .io import parse_ma, resolve_goal, write_ma
from .model import ModelError, ResourceError, validate
from .numeric import SolverError
from .objectives import (
    ExpectedTimeQuery,
    LraQuery,
    ReachQuery,
    TimedQuery,
    expected_time,
    lra,
    timed_reachability,
    unbounded_reachability,
)
from .result import OBJECTIVES

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maqa", description="Quantitative analysis of Markov automata.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    a = sub.add_parser("analyze", help="compute an objective on a .ma model")
    a.add_argument("--model", default="-", help="model file, '-' for stdin (default)")
    a.add_argument("--objective", required=True, choices=OBJECTIVES)
    a.add_argument("--goal", required=True, help="label or union 'l1|l2'")
    a.add_argument("--from", dest="lower", default="0", help="interval start (timed objectives)")
    a.add_argument("--to", dest="upper", help="interval end (timed objectives)")
    a.add_argument("--epsilon", type=float, default=1e-3)
    a.add_argument("--engine", choices=("vi", "lp"), default="vi")
    a.add_argument("--tol", type=float, default=1e-8)
    a.add_argument("--policy", help="write the extracted policy to this file")
    a.add_argument("--format", choices=("text", "json"), default="text")

    g = sub.add_parser("import-gspn", help="build the MA of a .gspn net")
    g.add_argument("file")
    g.add_argument("-o", "--output", default="-")
    g.add_argument("--bound", type=int)
    g.add_argument("--state-limit", type=int, default=DEFAULT_STATE_LIMIT)

    gen = sub.add_parser("gen", help="generate a case-study model")
    gsub = gen.add_subparsers(dest="family", parser_class=_Parser)
    gsub.required = True
    pol = gsub.add_parser("polling", help="polling system with two stations")
    pol.add_argument("--Q", type=int, required=True, help="queue capacity")
    pol.add_argument("--N", type=int, required=True, help="number of job types")
    pol.add_argument("-o", "--output", default="-")
    q = gsub.add_parser("queue", help="two stations sharing one server")
    q.add_argument("--l1", type=float, required=True)
    q.add_argument("--l2", type=float, required=True)
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("-o", "--output", default="-")

    v = sub.add_parser("validate", help="report model diagnostics")
    v.add_argument("file", help=".ma or .gspn file ('-' reads .ma from stdin)")
    v.add_argument("--notes", action="store_true", help="also list informational notes")
    return p


def _analyze(args) -> int:
    ma, _ = parse_ma(_read(args.model))
    goal = resolve_goal(ma, args.goal)
    kind, direction = args.objective.split("-")
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    if kind == "et":
        res = expected_time(ma, ExpectedTimeQuery(goal, direction, args.engine, args.tol))
    elif kind == "lra":
        res = lra(ma, LraQuery(goal, direction, args.engine, args.tol))
    elif kind == "tbr":
        if args.upper is None:
            raise UsageError("timed objectives need --to")
        res = timed_reachability(ma, TimedQuery(goal, direction, args.lower, args.upper, args.epsilon))
    else:
        res = unbounded_reachability(ma, ReachQuery(goal, direction))
    if args.policy:
        if kind == "tbr":
            print("maqa: timed objectives have no stationary policy; --policy ignored", file=sys.stderr)
        else:
            lines = res.policy_lines()
            _write(args.policy, "".join(line + "\n" for line in lines))
    _write(None, (res.to_json() if args.format == "json" else res.to_text()) + "\n")
    return EXIT_OK


def _import_gspn(args) -> int:
    net = parse_gspn(_read(args.file))
    ma, _ = build_ma(net, bound=args.bound, state_limit=args.state_limit)
    _write(args.output, write_ma(ma))
    return EXIT_OK


def _gen(args) -> int:
    if args.family == "polling":
        ma = gen_polling(PollingParams(args.Q, args.N))
    else:
        ma = gen_queueing(QueueParams(args.l1, args.l2, args.mu))
    _write(args.output, write_ma(ma))
    return EXIT_OK


def _validate(args) -> int:
    text = _read(args.file)
    if args.file.endswith(".gspn"):
        ma, _ = build_ma(parse_gspn(text))
    else:
        ma, _ = parse_ma(text)
    diags = validate(ma, notes=args.notes)
    for d in diags:
        print(d)
    errors = sum(d.severity == "error" for d in diags)
    print(f"{ma.num_states} states, {len(diags)} diagnostic(s), {errors} error(s)")
    return EXIT_INPUT if errors else EXIT_OK


COMMANDS = {"analyze": _analyze, "import-gspn": _import_gspn, "gen": _gen, "validate": _validate}


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ModelError) as exc:
        print(f"maqa: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ResourceError, SolverError) as exc:
        print(f"maqa: error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as exc:
        print(f"maqa: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
