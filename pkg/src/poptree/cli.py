"""Command-line surface.

Subcommands: ``validate``, ``wmm``, ``bayes``, ``suite``, ``report``.
Exit statuses: 0 success, 1 usage error, 2 data or model error,
3 convergence-flag failure under ``--strict-convergence``.  Seeds are
always explicit arguments; there is deliberately no environment-variable
fallback.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bayes import ChainConfig, ModelError, build_model, run_chains
from .diagnostics import DiagnosticsError
from .experiments import RHAT_FLAG, ESS_FLAG, ScenarioError, run_suite
from .results import read_summary_csv, write_bayes_bundle, write_suite_bundle, write_wmm_bundle
from .samplers import SamplerError
from .tree import TreeError, validate_tree
from .treefile import SpecFileError, load_tree_file, parse_suite_spec, tree_digest
from .wmm import EstimationError, WmmConfig, run_wmm

_DATA_ERRORS = (
    SpecFileError,
    TreeError,
    ModelError,
    EstimationError,
    SamplerError,
    ScenarioError,
    DiagnosticsError,
    OSError,
    ValueError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="poptree", description="Hidden-population estimation on evidence trees")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a tree spec; no files emitted")
    p.add_argument("tree")
    p.add_argument("--lenient", action="store_true", help="downgrade unknown fields to warnings")

    p = sub.add_parser("wmm", help="run the weighted multiplier method")
    p.add_argument("tree")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--interval-mass", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.add_argument("--lenient", action="store_true")

    p = sub.add_parser("bayes", help="sample the hierarchical posterior")
    p.add_argument("tree")
    p.add_argument("--chains", type=int, default=6)
    p.add_argument("--iterations", type=int, required=True)
    p.add_argument("--burn-in", type=int, required=True)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--traces", action="store_true", help="emit thinned per-chain samples")
    p.add_argument("--strict-convergence", action="store_true")
    p.add_argument("--lenient", action="store_true")

    p = sub.add_parser("suite", help="run a scenario suite")
    p.add_argument("scenarios")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the suite seed")
    p.add_argument("--strict-convergence", action="store_true")
    p.add_argument("--lenient", action="store_true")

    p = sub.add_parser("report", help="print a human-readable view of a result bundle")
    p.add_argument("bundle")
    return parser


def _load(path, lenient):
    tree, priors, warnings = load_tree_file(path, lenient=lenient)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return tree, priors


def _cmd_validate(args) -> int:
    tree, _, warnings = load_tree_file(args.tree, lenient=args.lenient)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    violations = validate_tree(tree)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return 2
    return 0


def _cmd_wmm(args) -> int:
    tree, priors = _load(args.tree, args.lenient)
    config = WmmConfig(
        iterations=args.iterations, seed=args.seed, interval_mass=args.interval_mass
    )
    run = run_wmm(tree, config)
    write_wmm_bundle(
        args.out,
        run,
        tree_digest=tree_digest(tree, priors),
        tree_name=tree.name,
        command="wmm",
    )
    lo, hi = run.quantile_interval
    print(
        f"root estimate {run.mean:.6g} (median {run.median:.6g}, "
        f"central {config.interval_mass:.0%} {lo:.6g}..{hi:.6g}) -> {args.out}"
    )
    return 0


def _cmd_bayes(args) -> int:
    tree, priors = _load(args.tree, args.lenient)
    if priors is None:
        raise ModelError(f"{args.tree}: no priors block; the bayes engine needs one")
    model = build_model(tree, priors)
    config = ChainConfig(
        chains=args.chains,
        iterations=args.iterations,
        burn_in=args.burn_in,
        thin=args.thin,
        seed=args.seed,
        keep_traces=args.traces,
    )
    summary = run_chains(model, config)
    write_bayes_bundle(
        args.out,
        summary,
        tree_digest=tree_digest(tree, priors),
        tree_name=tree.name,
        command="bayes",
    )
    root = model.tree.root().id
    stats = summary.quantities[root]
    print(
        f"posterior {root}: mean {stats.mean:.6g} "
        f"({stats.q2_5:.6g}..{stats.q97_5:.6g}), max rhat {summary.max_rhat():.4f}, "
        f"min ess {summary.min_ess():.0f} -> {args.out}"
    )
    if args.strict_convergence and (
        summary.max_rhat() > RHAT_FLAG or summary.min_ess() < ESS_FLAG
    ):
        print("convergence flags tripped", file=sys.stderr)
        return 3
    return 0


def _cmd_suite(args) -> int:
    with open(args.scenarios, "r", encoding="utf-8") as fh:
        suite, warnings = parse_suite_spec(fh.read(), lenient=args.lenient)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    tree_path = Path(args.scenarios).parent / suite.tree_path
    tree, priors = _load(tree_path, args.lenient)
    seed = suite.seed if args.seed is None else args.seed
    report = run_suite(
        suite.scenarios, baseline=suite.baseline, tree=tree, priors=priors, suite_seed=seed
    )
    write_suite_bundle(
        args.out, report, suite_name=suite.name, tree_digest=tree_digest(tree, priors), command="suite"
    )
    failures = [
        (r.name, q) for r in report.results for q, ok in r.direction_checks.items() if not ok
    ]
    for name, quantity in failures:
        print(f"direction check failed: scenario {name!r}, quantity {quantity!r}", file=sys.stderr)
    flagged = [r.name for r in report.results if r.flagged]
    for name in flagged:
        print(f"convergence flagged: scenario {name!r}", file=sys.stderr)
    print(f"{len(report.results)} scenarios -> {args.out}")
    if failures:
        return 2
    if args.strict_convergence and flagged:
        return 3
    return 0


def _cmd_report(args) -> int:
    bundle = Path(args.bundle)
    meta_path = bundle / "run_metadata.json"
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    print(f"{meta['tool']} {meta['version']} | {meta['engine']} run on tree {meta.get('tree', '?')}")
    print(f"tree digest {meta['tree_digest'][:16]}...  config {meta.get('config', {})}")
    summary_path = bundle / "summary.csv"
    if summary_path.exists():
        rows = read_summary_csv(summary_path)
        header = f"{'quantity':>10s} {'mean':>12s} {'sd':>12s} {'q2.5':>12s} {'median':>12s} {'q97.5':>12s} {'ess':>8s} {'rhat':>7s}"
        print(header)
        for row in rows:
            print(
                f"{row['quantity']:>10s} {row['mean']:>12s} {row['sd']:>12s} "
                f"{row['q2.5']:>12s} {row['median']:>12s} {row['q97.5']:>12s} "
                f"{row['ess']:>8s} {row['rhat']:>7s}"
            )
    weights_path = bundle / "weights.csv"
    if weights_path.exists():
        print("path weights:")
        for row in read_summary_csv(weights_path):
            print(f"  {row['leaf']:>6s} {row['weight']:>10s}")
    scenarios_path = bundle / "scenarios.csv"
    if scenarios_path.exists():
        print("scenarios:")
        for row in read_summary_csv(scenarios_path):
            delta = row["delta_vs_baseline"]
            extra = f" delta {delta}" if delta else ""
            print(
                f"  {row['scenario']:>20s} {row['quantity']:>8s} mean {row['mean']}"
                f" ({row['q2.5']}..{row['q97.5']}){extra}"
            )
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "wmm": _cmd_wmm,
    "bayes": _cmd_bayes,
    "suite": _cmd_suite,
    "report": _cmd_report,
}


def cli_dispatch(argv) -> int:
    """Parse ``argv`` (without the program name) and run the subcommand."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
