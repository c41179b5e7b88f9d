"""Command line entry point: ``optimist COMMAND --config PATH [options]``.

Exit status: 0 pass, 1 certification failure, 2 configuration error,
3 planner budget error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .agents import pairwise_distances
from .classes import ClassFileError
from .config import ConfigError, ExperimentConfig, load_config
from .environments import InvalidDistribution
from .harness import (BatchResult, batch_run, certify_det_bound, certify_stoch,
                      default_jobs, prepare)
from .planning import PlanningBudgetExceeded

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
COMMANDS = ("run", "verify-det", "verify-stoch", "verify-compact", "cover", "inspect-class")
TV_MATRIX_MAX = 40


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optimist", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default="./out", help="output directory (default ./out)")
    p.add_argument("--override", action="append", default=[], metavar="K=V",
                   help="dotted config override, value parsed as JSON when possible")
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: $OPTIMIST_JOBS or 1)")
    return p


def _batch(config: ExperimentConfig, args) -> BatchResult:
    jobs = args.jobs if args.jobs is not None else default_jobs()
    res = batch_run(config, jobs=jobs, outdir=args.out)
    budget = [f for f in res.failures if f.get("budget")]
    if budget:
        raise PlanningBudgetExceeded(budget[0]["node_count"], config.agent.node_budget)
    for f in res.failures:
        print(f"run {f['run']} failed: {f['error']}", file=sys.stderr)
    return res


def _write(args, config: ExperimentConfig, suffix: str, text: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{config.digest()}_{suffix}"
    path.write_text(text)
    return path


def _print_aggregate(agg: dict) -> None:
    print(f"runs: {agg['runs']}  excluded: {agg['excluded_runs']}  "
          f"T_opt max: {agg['T_opt_max']}  K max: {agg['K_max']}")
    for e, c in agg["counts"].items():
        print(f"  eps={e}: count max {c['max']}, mean {c['mean']:.3f}, "
              f"settled fraction {agg['settled_fraction'][e]}")


def cmd_run(config: ExperimentConfig, args) -> int:
    res = _batch(config, args)
    _print_aggregate(res.aggregate)
    return EXIT_FAIL if res.failures else EXIT_OK


def cmd_verify_det(config: ExperimentConfig, args) -> int:
    if config.agent.kind not in ("conservative", "liberal"):
        raise ConfigError(f"verify-det needs agent.kind conservative or liberal, "
                          f"got {config.agent.kind!r}")
    setup = prepare(config)
    res = _batch(config, args)
    M = len(setup.members)
    lines, ok = [], not res.failures
    for e in config.epsilons:
        v = certify_det_bound(res.summaries, e, M, config.gamma)
        ok &= v.passed
        lines.append(v.report())
    text = "\n".join(lines) + "\n"
    _write(args, config, "verdict.txt", text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_FAIL


def _stoch_verdicts(config, res, M) -> tuple[bool, list[str]]:
    lines, ok = [], not res.failures
    for e in config.epsilons:
        v = certify_stoch(res.summaries, config.agent.z, M, e, config.settle_fraction)
        ok &= v.passed
        lines.append(v.report())
    return ok, lines


def cmd_verify_stoch(config: ExperimentConfig, args) -> int:
    if config.agent.kind != "stochastic":
        raise ConfigError(f"verify-stoch needs agent.kind stochastic, got {config.agent.kind!r}")
    setup = prepare(config)
    res = _batch(config, args)
    ok, lines = _stoch_verdicts(config, res, len(setup.members))
    text = "\n".join(lines) + "\n"
    _write(args, config, "verdict.txt", text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_compact(config: ExperimentConfig, args) -> int:
    kind = config.agent.kind
    if kind not in ("compact_cover", "compact_radius"):
        raise ConfigError(f"verify-compact needs agent.kind compact_cover or compact_radius, "
                          f"got {kind!r}")
    setup = prepare(config)
    res = _batch(config, args)
    ok, lines = _stoch_verdicts(config, res, len(setup.members))
    if kind == "compact_radius":
        z = config.agent.z
        cov = res.aggregate["coverage_fraction"]
        mono = res.aggregate["radius_monotone_runs"]
        cov_ok = cov is not None and cov >= 1.0 - z
        mono_ok = mono == len(res.summaries)
        ok = ok and cov_ok and mono_ok
        lines.append(f"coverage fraction {cov} >= {1.0 - z:g}: {'ok' if cov_ok else 'FAIL'}")
        lines.append(f"radius non-increasing in {mono}/{len(res.summaries)} runs: "
                     f"{'ok' if mono_ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    _write(args, config, "verdict.txt", text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_cover(config: ExperimentConfig, args) -> int:
    if config.agent.cover_epsilon is None:
        raise ConfigError("cover needs agent.cover_epsilon")
    cfg = config if config.agent.kind == "compact_cover" else config.replace(**{"agent.kind": "compact_cover"})
    setup = prepare(cfg)
    cov = setup.cover
    doc = {"family": setup.family.name, "radius": cov.radius, "H": cov.H,
           "max_distance": cov.max_distance, "num_centers": len(cov.centers),
           "centers": [list(p) for p in cov.params]}
    _write(args, config, "cover.json", json.dumps(doc, indent=2) + "\n")
    print(f"{len(cov.centers)} centers, radius {cov.radius:g}, "
          f"verified max distance {cov.max_distance:g}")
    return EXIT_OK


def cmd_inspect_class(config: ExperimentConfig, args) -> int:
    setup = prepare(config)
    members = setup.members
    alph = members[0].alphabets
    print(f"class size: {len(members)}  |A|={alph.num_actions} |O|={alph.num_observations} "
          f"rewards={list(alph.reward_values)}")
    for m in members:
        v, a = setup.planner.solve(m, m.initial_state(), config.horizon)
        kind = "deterministic" if m.deterministic else "stochastic"
        print(f"  {m.name}: {kind}, V*(empty history, l={config.horizon}) = {v:.6f}, first action {a}")
    H = config.H
    if len(members) > TV_MATRIX_MAX or alph.num_percepts ** H > 1e6:
        print(f"TV matrix skipped (size {len(members)}, horizon {H})")
        return EXIT_OK
    D = setup.distances if setup.distances is not None else pairwise_distances(members, H)
    print(f"horizon-{H} TV matrix (probe: empty history, constant policies):")
    with np.printoptions(precision=4, suppress=True, linewidth=120):
        print(D)
    return EXIT_OK


HANDLERS = {"run": cmd_run, "verify-det": cmd_verify_det, "verify-stoch": cmd_verify_stoch,
            "verify-compact": cmd_verify_compact, "cover": cmd_cover,
            "inspect-class": cmd_inspect_class}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.override, args.seed)
        return HANDLERS[args.command](config, args)
    except (ConfigError, ClassFileError, InvalidDistribution) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlanningBudgetExceeded as exc:
        print(f"budget error: {exc} (node count {exc.node_count})", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
