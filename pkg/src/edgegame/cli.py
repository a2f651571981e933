"""Command-line interface: simulate, sweep, verify, oracle, report.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigurationError, EdgeGameError
from .game import ColorerKind
from .phase import PhaseKind


def _add_override_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON file")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--trials", type=int, help="override trial count")
    p.add_argument("--threads", type=int, help="override worker count")
    p.add_argument("--out", help="output directory")


def _load_experiment(args):
    from .harness import ExperimentConfig

    exp = ExperimentConfig.from_json(args.config)
    data = exp.to_dict()
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    if args.threads is not None:
        data["threads"] = args.threads
    return ExperimentConfig.from_dict(data)


def _parse_edges(text: str):
    # "0-1,1-2" -> [(0, 1), (1, 2)]
    edges = []
    for part in text.split(","):
        u, v = part.strip().split("-")
        edges.append((int(u), int(v)))
    return edges


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="edgegame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one experiment config")
    _add_override_flags(p_sim)

    p_sweep = sub.add_parser("sweep", help="run an eps or gamma grid")
    _add_override_flags(p_sweep)
    p_sweep.add_argument("--grid", choices=["eps", "gamma"], required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated grid values")

    p_verify = sub.add_parser("verify", help="run the oracle/invariant suite")
    p_verify.add_argument("--level", choices=["quick", "full"], default="quick")

    p_oracle = sub.add_parser("oracle", help="print exact oracle values")
    o_sub = p_oracle.add_subparsers(dest="oracle_command", required=True)
    p_gadget = o_sub.add_parser("gadget", help="center-edge failure probability")
    p_gadget.add_argument("--delta", type=int, required=True)
    p_gadget.add_argument("--gamma-size", type=int, required=True)
    p_equiv = o_sub.add_parser("equivalence", help="compare the two colorer distributions")
    p_equiv.add_argument("--edges", required=True, help='schedule, e.g. "0-1,1-2,0-2"')
    p_equiv.add_argument("--gamma-size", type=int, required=True)
    p_equiv.add_argument("--b", type=int, default=1)
    p_equiv.add_argument("--phase", choices=["dense", "random_order"], default="dense")

    p_report = sub.add_parser("report", help="plots from a trials CSV or sweep JSON")
    p_report.add_argument("--input", required=True)
    p_report.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            from .harness import run_trials

            exp = _load_experiment(args)
            _, report = run_trials(exp, out_dir=args.out)
            print(json.dumps(report, sort_keys=True, indent=2))
            return 0
        if args.command == "sweep":
            from .harness import sweep

            exp = _load_experiment(args)
            values = [float(x) if args.grid == "eps" else int(x) for x in args.values.split(",")]
            result = sweep(exp, args.grid, values, out_dir=args.out)
            print(json.dumps(
                {"grid": result["grid"],
                 "failure_rates": [p["report"]["failure_rate"] for p in result["points"]]},
                sort_keys=True, indent=2))
            return 0
        if args.command == "verify":
            from .harness import verify

            return 0 if verify(level=args.level) else 1
        if args.command == "oracle":
            from . import oracle

            if args.oracle_command == "gadget":
                p = oracle.gadget_failure_probability(args.delta, args.gamma_size)
                print(f"gadget(delta={args.delta}, gamma={args.gamma_size}) "
                      f"center-edge failure probability = {p} = {float(p):.6f}")
                return 0
            edges = _parse_edges(args.edges)
            kind = PhaseKind(args.phase)
            da = oracle.exact_outcome_distribution(
                edges, ColorerKind.RANDOM_GREEDY, args.gamma_size, args.b, kind)
            dap = oracle.exact_outcome_distribution(
                edges, ColorerKind.PHASE_PALETTE, args.gamma_size, args.b, kind)
            same = da == dap
            print(f"outcomes: {len(da.probabilities)} (greedy) vs {len(dap.probabilities)} (palette)")
            for key in sorted(da.probabilities, key=str):
                print(f"  {key}: {da.probabilities[key]}")
            print(f"distributions identical: {same}")
            return 0 if same else 1
        if args.command == "report":
            from .harness import write_report

            for path in write_report(args.input, args.out):
                print(f"wrote {path}")
            return 0
        raise ConfigurationError(f"unknown command {args.command}")
    except (ConfigurationError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EdgeGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
