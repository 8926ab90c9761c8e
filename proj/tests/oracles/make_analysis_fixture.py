"""Symmetric bimodal score fixture and golden moderate labels.

The labels come from brute-force trapezoid integration of the Gaussian KDE on a fine grid:
per side, the moderate boundary is where the area accumulated outward from the density
minimum reaches 25% of the area between the minimum and that side's peak.
"""
import csv
import pathlib

import numpy as np

out = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "analysis"
out.mkdir(parents=True, exist_ok=True)
rng = np.random.default_rng(11)

half = rng.normal(-1.5, 0.5, 400)
scores = np.concatenate([half, -half])
ids = np.array([f"s{i:03d}" for i in range(scores.size)])
order = rng.permutation(scores.size)
scores, ids = scores[order], ids[order]

n = scores.size
sd = scores.std(ddof=1)
q75, q25 = np.percentile(scores, [75, 25])
h = 0.9 * min(sd, (q75 - q25) / 1.34) * n ** -0.2

grid = np.linspace(scores.min() - 3 * h, scores.max() + 3 * h, 400001)
dens = np.zeros_like(grid)
for s in scores:
    dens += np.exp(-0.5 * ((grid - s) / h) ** 2)
dens /= n * h * np.sqrt(2 * np.pi)

peaks = [i for i in range(1, grid.size - 1) if dens[i] > dens[i - 1] and dens[i] >= dens[i + 1]]
top = sorted(sorted(peaks, key=lambda i: -dens[i])[:2])
lo_pk, hi_pk = top
m = lo_pk + 1 + int(np.argmin(dens[lo_pk + 1 : hi_pk]))

cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
left_area = cum[m] - cum[lo_pk]
right_area = cum[hi_pk] - cum[m]
lower = np.interp(cum[m] - 0.25 * left_area, cum[lo_pk : m + 1], grid[lo_pk : m + 1])
upper = np.interp(cum[m] + 0.25 * right_area, cum[m : hi_pk + 1], grid[m : hi_pk + 1])

labels = np.where(scores < lower, "liberal", np.where(scores > upper, "conservative", "moderate"))
margin = np.min(np.minimum(np.abs(scores - lower), np.abs(scores - upper)))

with open(out / "bimodal_scores.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["author_id", "score"])
    for a, s in zip(ids, scores):
        w.writerow([a, repr(float(s))])
with open(out / "bimodal_labels.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["author_id", "label"])
    w.writerows(zip(ids, labels))
with open(out / "bimodal_split.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["bandwidth", "minimum", "left_peak", "right_peak", "lower", "upper", "margin"])
    w.writerow([repr(float(v)) for v in (h, grid[m], grid[lo_pk], grid[hi_pk], lower, upper, margin)])

print(dict(zip(*np.unique(labels, return_counts=True))), "margin", margin)
