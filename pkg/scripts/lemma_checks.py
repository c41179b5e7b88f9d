"""Time-consistency and value/TV chain checks over many random classes.

    python3 scripts/lemma_checks.py --det-runs 200 --stoch-runs 20
"""

import argparse
from pathlib import Path

from optimist.config import load_config
from optimist.harness import time_consistency_rows, value_tv_chain_rows

ROOT = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--det-runs", type=int, default=200)
    p.add_argument("--stoch-runs", type=int, default=20)
    p.add_argument("--steps", type=int, default=20)
    args = p.parse_args()
    rows = bad = 0
    for k in range(args.det_runs):
        c = load_config(ROOT / "det_random_suite.json",
                        [f"class.seed={1000 + k}", f"true_env={k % 4}", "T_max=40"])
        rr = time_consistency_rows(c, 0)
        rows += len(rr)
        bad += sum(not r.ok for r in rr)
    print(f"time consistency: {rows} steps, {bad} violations")
    crow = cbad = 0
    for k in range(args.stoch_runs):
        c = load_config(ROOT / "lemma_chain.json", [f"class.seed={k}"])
        rr = value_tv_chain_rows(c, k, steps=args.steps)
        crow += len(rr)
        cbad += sum(not r.ok for r in rr)
    print(f"value/TV chain: {crow} pairs, {cbad} violations")
    return 1 if bad or cbad else 0


if __name__ == "__main__":
    raise SystemExit(main())
