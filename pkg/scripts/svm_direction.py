"""Linear separability of watermarked latents and the traversal attack.

    python scripts/svm_direction.py [--scheme tree_ring] [--train 1000] [--traverse 50] [--steps 11]
"""

import argparse

from scipy.stats import spearmanr

from wmlab.harness import ExperimentConfig, Lab, svm_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scheme", default="tree_ring")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train", type=int, default=1000)
    ap.add_argument("--traverse", type=int, default=50)
    ap.add_argument("--steps", type=int, default=11)
    args = ap.parse_args()
    lab = Lab.build(ExperimentConfig(seed=args.seed, scheme=args.scheme))
    res = svm_experiment(lab, args.train, args.traverse, args.steps)
    print(f"train_accuracy={res.hyperplane.train_accuracy}")
    print("step,detection_rate")
    for s, r in zip(res.steps, res.detection_rate):
        print(f"{s:.4f},{r:.2f}")
    print(f"spearman={spearmanr(res.steps, res.detection_rate).statistic:.3f}")


if __name__ == "__main__":
    main()
