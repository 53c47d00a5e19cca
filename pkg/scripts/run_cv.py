"""5-fold cross-validation of the classifier on the zoo plus benign data."""

import argparse
import time

import numpy as np

from sesame import bundled_lines
from sesame.classifier import TrainConfig, build_training_set, k_fold_cv
from sesame.zoo import families


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-class", type=int, default=2000)
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    ds = build_training_set(families(), bundled_lines("benign_domains.txt"), args.per_class, seed=args.seed)
    res = k_fold_cv(ds, k=args.folds, config=TrainConfig(seed=args.seed, epochs=args.epochs), split_seed=args.seed)
    for i, m in enumerate(res.folds):
        print(f"fold {i}: acc {m.overall_accuracy:.4f}  f1 {m.weighted_f1:.4f}")
    m = res.mean
    print(f"mean:   acc {m.overall_accuracy:.4f}  P {m.weighted_precision:.4f}  R {m.weighted_recall:.4f}  f1 {m.weighted_f1:.4f}")
    names = ds.label_names
    width = max(map(len, names))
    print(" " * width, *(n[:6].rjust(6) for n in names))
    for name, row in zip(names, m.confusion_matrix):
        print(name.rjust(width), *(f"{v:6d}" for v in np.asarray(row)))
    print(f"done in {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
