"""How the two thresholds behave on synthetic ground truth.

The merge radius psi must cover the scatter of repeated clicks: below it,
faceted points split and faces come out wrong. The area-ratio threshold
gamma decides when an occluded four-corner face is kept as labeled.

Run:  python demos/psi_gamma_trends.py [out_dir]
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cartonsynth.annotations import LabeledInstance, Point2D
from cartonsynth.errors import CartonSynthError
from cartonsynth.reconstruction import Source, reconstruct_single
from cartonsynth.segmentation import segment_instance
from cartonsynth.synthetic import eulerian_clicks, jitter_points, random_box

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)
rng = np.random.default_rng(0)

# Boxes whose corners are clicked with up to 12 px of scatter.
cases = []
for i in range(200):
    verts, loops = random_box(rng, int(rng.integers(1, 4)), (400, 400), 150, min_sep=60)
    pts = jitter_points(verts[eulerian_clicks(loops)], 12.0, rng)
    cases.append((LabeledInstance(i, "All", tuple(Point2D(*p) for p in pts)), len(loops), len(verts)))


def correct(inst, n_loops, n_verts, psi):
    try:
        clusters, surfaces = segment_instance(inst, psi)
    except CartonSynthError:
        return False
    return clusters.size == n_verts and len(surfaces.loops) == n_loops


psis = np.arange(4, 31, 2)
errors = [np.mean([not correct(c, n, v, psi) for c, n, v in cases]) for psi in psis]
for psi, e in zip(psis, errors):
    print(f"psi={psi:2d}  error rate {100 * e:5.1f}%")

# Trapezoids with ratio area / best parallelogram = (10 + w) / 20.
widths = np.linspace(0.2, 9.8, 200)
ratios = (10 + widths) / 20
kept = [
    reconstruct_single(np.array([[0, 0], [10, 0], [5 + w / 2, 8], [5 - w / 2, 8]]), "Occlusion").source
    is Source.ORIGINAL
    for w in widths
]

fig, axes = plt.subplots(1, 2, figsize=(10, 4))
axes[0].plot(psis, 100 * np.array(errors), marker="o")
axes[0].set_xlabel("psi [px]")
axes[0].set_ylabel("wrong segmentations [%]")
axes[1].step(ratios, kept, where="mid")
axes[1].axvline(2 / 3, color="gray", ls="--")
axes[1].set_xlabel("area ratio")
axes[1].set_ylabel("kept as labeled")
fig.tight_layout()
fig.savefig(out / "psi_gamma_trends.png", dpi=110)
print("wrote", out / "psi_gamma_trends.png")
