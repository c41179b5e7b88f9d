"""Error-count certification over a suite of random deterministic classes.

    python3 scripts/det_suite.py --classes 50 --epsilon 0.1
"""

import argparse
from pathlib import Path

from optimist.config import load_config
from optimist.harness import batch_run, certify_det_bound, error_count_bounds, prepare

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "det_random_suite.json"))
    p.add_argument("--classes", type=int, default=50)
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    worst, failed = 0, 0
    for k in range(args.first_seed, args.first_seed + args.classes):
        c = load_config(args.config, [f"class.seed={k}", f"epsilons=[{args.epsilon}]"])
        M = len(prepare(c).members)
        res = batch_run(c, jobs=args.jobs)
        v = certify_det_bound(res.summaries, args.epsilon, M, c.gamma)
        worst = max([worst] + [s.counts[args.epsilon] for s in res.summaries])
        if not v.passed:
            failed += 1
            print(f"class seed {k}:\n{v.report()}")
    tight, relaxed, ell = error_count_bounds(args.epsilon, M, c.gamma)
    print(f"{args.classes} classes, worst count {worst}, bounds {tight} / {relaxed:.2f}, "
          f"{failed} failing classes")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
