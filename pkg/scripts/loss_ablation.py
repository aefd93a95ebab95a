"""Penalised objective vs PGD vs DCT-masked PGD on Tree-Ring forgery.

Prints ASR and mean l2(delta) per setting, then every (penalised, PGD) pair
whose ASRs lie within 0.03 of each other.

    python scripts/loss_ablation.py [--pairs 100] [--seed 0]
"""

import argparse

from wmlab.harness import ExperimentConfig, Lab, aggregate, sweep_records, synth_dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[1.3, 1.2, 1.1, 1.0, 0.9, 0.8, 0.7, 0.6])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.03, 0.04, 0.05, 0.07])
    args = ap.parse_args()
    base = ExperimentConfig(seed=args.seed, trial_count=args.pairs, scheme="tree_ring")
    lab = Lab.build(base)
    data = synth_dataset(lab)
    rows = {}
    for method, values in (("penalised", args.lambdas), ("pgd", args.epsilons), ("dct", [0.1])):
        lab.cfg = base.with_(method=method)
        for a in aggregate(sweep_records(lab, values, data)):
            v = a["lam"] if method == "penalised" else a["epsilon"]
            rows[(method, v)] = a
            print(f"{method:9s} value={v:<6g} asr={a['asr']:.2f} l2={a['l2']:.3f} linf={a['linf']:.3f}", flush=True)
    print("matched pairs (|asr difference| <= 0.03):")
    for (m1, v1), a1 in rows.items():
        for (m2, v2), a2 in rows.items():
            if m1 == "penalised" and m2 == "pgd" and abs(a1["asr"] - a2["asr"]) <= 0.03:
                print(f"  lambda={v1:g} asr={a1['asr']:.2f} l2={a1['l2']:.3f}  vs  "
                      f"epsilon={v2:g} asr={a2['asr']:.2f} l2={a2['l2']:.3f}")


if __name__ == "__main__":
    main()
