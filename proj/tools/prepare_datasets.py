#!/usr/bin/env python3
"""Convert the raw UCI breast-cancer-wisconsin and Adult files into the CSV
layout read by `fedal run`.

Sources (no network needed, both ship inside PyPI packages):
  * breast-cancer-wisconsin: MASS `biopsy` table, bundled in `pydataset`
    (resources/rdata/csv/MASS/biopsy.csv).
  * Adult: `adult.data` bundled in `responsibly` (responsibly/dataset/adult/).

Output:
  data/breast_cancer_wisc.csv  label 1 = malignant, z-scored features + bias
  data/adult_b_train.csv       22,654 rows held by clients
  data/adult_b_test.csv        5,659 rows held by the server
"""
import argparse
import csv
import pathlib
import random

import numpy as np


def zscore(a):
    sd = a.std(axis=0)
    sd[sd == 0] = 1.0
    return (a - a.mean(axis=0)) / sd


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in r])


def breast_cancer(src, out):
    rows = []
    with open(src) as fh:
        for rec in csv.DictReader(fh):
            vals = [rec[f"V{i}"] for i in range(1, 10)]
            if any(v in ("", "NA") for v in vals):
                continue
            rows.append(([float(v) for v in vals], 1 if rec["class"] == "malignant" else 0))
    x = zscore(np.array([r[0] for r in rows]))
    header = ["bias"] + [f"v{i}" for i in range(1, 10)] + ["label"]
    write_csv(out, header, [[1.0] + list(map(float, xi)) + [y] for xi, (_, y) in zip(x, rows)])


ADULT_COLS = ["age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
              "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
              "hours_per_week", "native_country", "income"]
NUMERIC = ["age", "education_num", "capital_gain", "capital_loss", "hours_per_week"]
ONE_HOT = ["workclass", "marital_status", "occupation", "race"]


def adult(src, out_train, out_test, n_train, n_test, seed):
    recs = []
    with open(src) as fh:
        for line in fh:
            parts = [p.strip() for p in line.strip().split(",")]
            if len(parts) != len(ADULT_COLS) or "?" in parts:
                continue
            recs.append(dict(zip(ADULT_COLS, parts)))
    random.Random(seed).shuffle(recs)
    recs = recs[: n_train + n_test]
    levels = {c: sorted({r[c] for r in recs}) for c in ONE_HOT}
    num = zscore(np.array([[float(r[c]) for c in NUMERIC] for r in recs]))
    header = ["bias"] + NUMERIC + [f"{c}={v}" for c in ONE_HOT for v in levels[c]] + ["label", "group"]
    rows = []
    for r, xn in zip(recs, num):
        feats = [1.0] + list(map(float, xn))
        for c in ONE_HOT:
            feats += [1.0 if r[c] == v else 0.0 for v in levels[c]]
        rows.append(feats + [1 if r["income"].startswith(">50K") else 0, 1 if r["sex"] == "Male" else 0])
    assert len(header) - 2 == 39, len(header)
    write_csv(out_train, header, rows[:n_train])
    write_csv(out_test, header, rows[n_train:])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--biopsy", required=True)
    ap.add_argument("--adult", required=True)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    out = pathlib.Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    breast_cancer(a.biopsy, out / "breast_cancer_wisc.csv")
    adult(a.adult, out / "adult_b_train.csv", out / "adult_b_test.csv", 22654, 5659, a.seed)


if __name__ == "__main__":
    main()
