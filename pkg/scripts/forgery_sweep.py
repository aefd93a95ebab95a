"""Forgery ASR and perturbation size over the lambda sweep, for every scheme.

    python scripts/forgery_sweep.py [--pairs 100] [--lambdas 1.0 0.4 0.2] [--out out/forgery]
"""

import argparse
from pathlib import Path

from wmlab.harness import ExperimentConfig, Lab, records_to_csv, summary_to_csv, sweep_records
from wmlab.watermarks import SCHEMES


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[1.0, 0.4, 0.2])
    ap.add_argument("--out", default="out/forgery")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for scheme in SCHEMES:
        cfg = ExperimentConfig(seed=args.seed, trial_count=args.pairs, scheme=scheme, role="forgery")
        records = sweep_records(Lab.build(cfg), args.lambdas)
        (out / f"{scheme}_sweep.csv").write_text(records_to_csv(records))
        summary = summary_to_csv(records)
        (out / f"{scheme}_summary.csv").write_text(summary)
        print(summary, end="", flush=True)


if __name__ == "__main__":
    main()
