"""Regenerates the bundled toy and thresholds datasets (deterministic)."""

import csv
import json
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def fmt(v):
    return "" if v is None else f"{v:.2f}"


def toy():
    rng = np.random.default_rng(7)
    n = 60
    rows = []
    for _ in range(n):
        age = rng.uniform(30, 80)
        bp = rng.uniform(90, 180)
        smoker = rng.choice(["yes", "no"])
        risk = (age > 55) + (bp > 140) + (smoker == "yes")
        label = "yes" if risk >= 2 else "no"
        if rng.uniform() < 0.08:
            label = "no" if label == "yes" else "yes"
        rows.append([age, bp, smoker, label])
    # a few missing cells, never the target
    for r, c in [(3, 0), (11, 1), (17, 2), (29, 0), (42, 1)]:
        rows[r][c] = None
    out = [[fmt(a) if not isinstance(a, str) else a for a in row[:2]] + row[2:] for row in rows]
    out = [[("" if v is None else v) for v in row] for row in out]
    write_csv(ROOT / "toy" / "toy.csv", ["age", "blood pressure", "smoker", "heart disease"], out)


def thresholds():
    rng = np.random.default_rng(11)
    n = 240
    rows = []
    for _ in range(n):
        x = rng.uniform(0, 10, size=6)
        label = "positive" if (x[0] > 6.5 and x[1] > 3.0) else "negative"
        rows.append([f"{v:.3f}" for v in x] + [label])
    write_csv(ROOT / "thresholds" / "thresholds.csv",
              ["marker a", "marker b", "noise 1", "noise 2", "noise 3", "noise 4", "status"], rows)


if __name__ == "__main__":
    (ROOT / "toy").mkdir(exist_ok=True)
    (ROOT / "thresholds").mkdir(exist_ok=True)
    toy()
    thresholds()
