"""Command-line front end.

Every subcommand is translated into a :class:`~approxatomic.scenario.Scenario`
and executed by :func:`~approxatomic.scenario.run_scenario`, so a CLI call and
the equivalent scenario file produce the same report bytes.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .generators import EXAMPLE_NAMES, generate_example
from .imaging import FRAMES, OPERATORS
from .io import write_decomposition
from .scenario import BUILDERS, EXIT_INPUT, Scenario, ScenarioError, read_scenario, run_scenario


def _add_source(p: argparse.ArgumentParser):
    g = p.add_argument_group("decomposition source (files or a generator)")
    g.add_argument("--atoms")
    g.add_argument("--functionals")
    g.add_argument("--operator")
    g.add_argument("--xd", default="row-lp:2", help="row-lp:P, row-linf or partial-sum-sup")
    g.add_argument("--norm", default="l2", help="l1, l2, lp:P, linf or c0")
    g.add_argument("--claimed", help="claimed bounds as 'a,b'")
    g.add_argument("--generator", choices=EXAMPLE_NAMES)
    g.add_argument("--dim", type=int)


def _add_probe_opts(p: argparse.ArgumentParser):
    p.add_argument("--probes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--mode", choices=("k-atomic", "xd-frame", "bessel"), default="k-atomic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="approxatomic", description=__doc__.splitlines()[0])
    parser.add_argument("--report", help="also write the JSON report to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("example", help="write a named example instance")
    p.add_argument("name", choices=EXAMPLE_NAMES)
    p.add_argument("dim", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", help="verify a decomposition on seeded probes")
    _add_source(p)
    _add_probe_opts(p)

    p = sub.add_parser("construct", help="apply a construction, then verify the result")
    p.add_argument("builder", choices=BUILDERS)
    _add_source(p)
    _add_probe_opts(p)
    p.add_argument("--k", help="operator for lift_by_k / pullback_functionals")
    p.add_argument("--t", help="operator for compose_left / compose_right")
    p.add_argument("--ops", nargs="+", help="S_1..S_N matrix files for from_finite_rank")
    p.add_argument("--out", help="directory for the constructed decomposition")

    p = sub.add_parser("bounds", help="exact optimal bounds (l2 path)")
    _add_source(p)
    p.add_argument("--level", help="level index, or 'all' for the full norm")

    p = sub.add_parser("equivalences", help="evaluate the five equivalent conditions")
    _add_source(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--no-strict", action="store_true",
                   help="evaluate even when K = TU is singular")

    p = sub.add_parser("demo-image", help="block decomposition of a P5 PGM image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--operator", choices=OPERATORS, default="identity")
    p.add_argument("--frame", choices=FRAMES, default="orthonormal-dct")

    p = sub.add_parser("run", help="execute a key=value scenario file")
    p.add_argument("scenario")
    return parser


_SOURCE_KEYS = ("atoms", "functionals", "operator", "xd", "norm", "claimed", "generator", "dim")


def _scenario_from_args(args) -> Scenario:
    params = {}
    keys = list(_SOURCE_KEYS) + ["probes", "seed", "tol", "mode", "k", "t", "out", "level", "block",
                                 "operator", "frame"]
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = str(value)
    if args.command == "construct":
        action = f"construct:{args.builder}"
        if args.ops:
            params["ops"] = " ".join(args.ops)
    elif args.command == "equivalences":
        action = "equivalences"
        if args.no_strict:
            params["strict"] = "false"
    elif args.command == "demo-image":
        action = "demo-image"
        params["in"] = args.input
    else:
        action = args.command
    params.setdefault("seed", "0")
    return Scenario(action, params, base_dir=Path.cwd())


def _example(args) -> int:
    d = generate_example(args.name, args.dim, args.seed)
    out = Path(args.out)
    meta = write_decomposition(out, d, name=args.name)
    lines = ["action=verify", f"name={args.name}-{args.dim}", "atoms=atoms.txt",
             "functionals=functionals.txt", "operator=operator.txt",
             f"norm={meta['norm']}", f"xd={meta['xd']}", "probes=1000", f"seed={args.seed}"]
    if meta["claimed"]:
        lines.append("claimed={!r},{!r}".format(*meta["claimed"]))
    (out / "verify.scenario").write_text("\n".join(lines) + "\n")
    sys.stdout.write(json.dumps(meta, indent=2) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "example":
            return _example(args)
        scenario = read_scenario(args.scenario) if args.command == "run" else _scenario_from_args(args)
    except (ScenarioError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    result = run_scenario(scenario)
    text = result.to_json()
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(text)
    if "error" in result.report:
        sys.stderr.write(f"error: {result.report['message']}\n")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
