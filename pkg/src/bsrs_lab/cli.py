"""Command-line front end: ``solve``, ``qlearn`` and ``verify``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import experiment as ex
from .bsrs import admissible_eta_range
from .plotting import plot_learning_curves, plot_steps_vs_eta
from .verify import MUTATIONS, run_all

log = logging.getLogger("bsrs_lab")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3


def _load(args, mode):
    config = ex.load_config(args.config)
    if config.mode != mode:
        raise ex.ConfigError(f"config mode is {config.mode!r}, this command needs {mode!r}")
    if args.seed_offset:
        config = ex.with_seed_offset(config, args.seed_offset)
    out = Path(args.output or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return config, out


def cmd_solve(args) -> int:
    try:
        config, out = _load(args, "ExactSolve")
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mdp = ex.build_environment(config)
    t0 = time.perf_counter()
    rows = ex.run_solve_sweep(mdp, config.etas, config.seeds, config.tolerance, config.max_steps,
                              lag=config.lag, jobs=args.jobs)
    summary = ex.summarize(rows)
    ex.write_sweep_csv(out / "sweep.csv", rows, timing=args.timing)
    ex.write_summary_csv(out / "summary.csv", summary)
    plot_steps_vs_eta(summary, admissible_eta_range(mdp.gamma), out / "steps_vs_eta.svg",
                      title=rf"{config.environment.height}x{config.environment.width} grid, $\gamma$={mdp.gamma:g}")
    log.info("%d runs in %.1fs", len(rows), time.perf_counter() - t0)
    for row in summary:
        print(f"eta={row.eta:+.4f}  converged {row.converged}/{row.runs}  mean steps {row.mean_steps:.2f} +/- {row.std_steps:.2f}")
    best = ex.best_eta(summary)
    if best is not None:
        print(f"best eta {best.eta:g}: {best.mean_steps:.2f} mean steps")
    print(f"wrote {out / 'sweep.csv'}, {out / 'summary.csv'}, {out / 'steps_vs_eta.svg'}")
    if all(r.diverged for r in rows):
        print("all runs diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_qlearn(args) -> int:
    try:
        config, out = _load(args, "QLearn")
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mdp = ex.build_environment(config)
    runs = ex.run_qlearn_sweep(mdp, config, jobs=args.jobs)
    ex.write_curves_csv(out / "learning_curves.csv", runs)
    total = config.qlearn_config(0.0, 0).total_steps
    curves = {}
    for eta in sorted(set(r.eta for r in runs)):
        curves[eta] = ex.mean_curve([r for r in runs if r.eta == eta], total)
    plot_learning_curves(curves, out / "curves.svg")
    for eta, (_x, y) in sorted(curves.items()):
        print(f"eta={eta:+.4f}  final mean return {y[-1]:.4f}")
    print(f"wrote {out / 'learning_curves.csv'}, {out / 'curves.svg'}")
    if all(r.diverged for r in runs):
        print("all runs diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_all(gamma=args.gamma, mutation=args.inject_bug)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="bsrs", description="Bootstrapped reward shaping experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    common.add_argument("--output", help="output directory (overrides output_dir)")
    common.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="exact self-shaped solves over an eta sweep")
    p.add_argument("config")
    p.add_argument("--timing", action="store_true", help="record wall_ms (makes sweep.csv non-reproducible)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("qlearn", parents=[common], help="sample-based Q-learning over an eta sweep")
    p.add_argument("config")
    p.set_defaults(func=cmd_qlearn)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("--gamma", type=float, default=None, help="fix the discount for every check")
    p.add_argument("--inject-bug", choices=sorted(MUTATIONS), default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
