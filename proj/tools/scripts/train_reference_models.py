#!/usr/bin/env python3
"""Train the small reference GBDT models used by the acceptance suite.

Inputs are the MASS `biopsy` (Wisconsin breast cancer) and `Pima.tr`/`Pima.te`
(Pima Indians diabetes) tables as CSV. Features are min-max normalized to
[0, 1], models are trained with XGBoost and written as JSON dumps, and the
evaluation examples are written in LIBSVM format together with the margins
XGBoost predicts for them.

    python3 train_reference_models.py --mass-dir <dir with csvs> --out data/
"""

import argparse
import json
import os

import numpy as np
import pandas as pd
import xgboost as xgb


def normalize(features):
    lo = features.min(axis=0)
    hi = features.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (features - lo) / span


def write_libsvm(path, labels, features):
    with open(path, "w", newline="\n") as out:
        for label, row in zip(labels, features):
            cells = [f"{j + 1}:{v:.17g}" for j, v in enumerate(row) if v != 0.0]
            out.write(" ".join([str(int(label))] + cells) + "\n")


def train(name, features, labels, trees, depth, eval_count, out_dir, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labels))
    features, labels = features[order], labels[order]
    n_train = int(round(0.8 * len(labels)))

    dtrain = xgb.DMatrix(features[:n_train], label=labels[:n_train])
    params = {
        "objective": "binary:logistic",
        "max_depth": depth,
        "eta": 0.3,
        "base_score": 0.5,
        "tree_method": "exact",
        "seed": seed,
    }
    booster = xgb.train(params, dtrain, num_boost_round=trees)

    dump = [json.loads(t) for t in booster.get_dump(dump_format="json")]
    with open(os.path.join(out_dir, f"{name}.xgb.json"), "w", newline="\n") as out:
        json.dump(dump, out, indent=1)

    # Held-out rows first, then training rows to reach eval_count.
    eval_order = list(range(n_train, len(labels))) + list(range(n_train))
    eval_order = eval_order[:eval_count]
    ex, ey = features[eval_order], labels[eval_order]
    write_libsvm(os.path.join(out_dir, f"{name}.eval.libsvm"), ey, ex)

    margins = booster.predict(xgb.DMatrix(ex), output_margin=True)
    np.savetxt(os.path.join(out_dir, f"{name}.eval.margins"), margins, fmt="%.9g")

    acc = np.mean((margins > 0).astype(int) == ey)
    print(f"{name}: {trees} trees, depth {depth}, d={features.shape[1]}, "
          f"eval n={len(ey)}, eval acc={acc:.3f}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--mass-dir", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    biopsy = pd.read_csv(os.path.join(args.mass_dir, "biopsy.csv")).dropna()
    bx = normalize(biopsy[[f"V{i}" for i in range(1, 10)]].to_numpy(float))
    by = (biopsy["class"] == "malignant").to_numpy(int)
    train("breast_cancer", bx, by, trees=4, depth=6, eval_count=500,
          out_dir=args.out, seed=7)

    pima = pd.concat([pd.read_csv(os.path.join(args.mass_dir, f))
                      for f in ("Pima.tr.csv", "Pima.te.csv")])
    cols = ["npreg", "glu", "bp", "skin", "bmi", "ped", "age"]
    px = normalize(pima[cols].to_numpy(float))
    py = (pima["type"] == "Yes").to_numpy(int)
    train("diabetes", px, py, trees=20, depth=5, eval_count=500,
          out_dir=args.out, seed=11)


if __name__ == "__main__":
    main()
