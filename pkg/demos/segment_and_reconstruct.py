"""Walk one carton annotation through segmentation and contour completion.

The three-face carton below is labeled the way an annotator would click
it: one pass, starting at a corner that belongs to a single face. We
split the clicks into faces, then pretend part of the carton is hidden
and let the reconstruction complete each face to a parallelogram.

Run:  python demos/segment_and_reconstruct.py [out_dir]
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cartonsynth.reconstruction import reconstruct_surfaces
from cartonsynth.segmentation import build_cost_matrix, segment_instance
from cartonsynth.synthetic import CARTON_CLICKS, example_carton
from cartonsynth.validation import validate_instance

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

inst = example_carton(occlusion="Occlusion")
print("clicked labels:", CARTON_CLICKS)
print("labeling rules:", "ok" if validate_instance(inst).ok else validate_instance(inst).violations)

# Points clicked several times collapse into one faceted point; the clicks
# then become directed edges between those merged points.
clusters, surfaces = segment_instance(inst)
label = {k: CARTON_CLICKS[g[0]] for k, g in enumerate(clusters.groups)}
v = build_cost_matrix(clusters)
print(f"{clusters.size} merged points, {len(v.edges())} directed edges")
for loop in surfaces.loops:
    print("  face:", [label[k] for k in loop])
print("common lines:", [(label[a], label[b]) for a, b in surfaces.common_lines])

# With the instance flagged as occluded, five-corner faces are completed and
# four-corner faces are kept when they already fill their best parallelogram.
recon = reconstruct_surfaces(surfaces, clusters, inst.occlusion)
for r in recon:
    print(f"  face {r.surface_index}: {r.source.value}")

fig, axes = plt.subplots(1, 2, figsize=(9, 4.5), sharex=True, sharey=True)
colors = ["tab:blue", "tab:green", "tab:red"]
for k in range(len(surfaces.loops)):
    pts = surfaces.loop_points(k)
    axes[0].fill(pts[:, 0], pts[:, 1], color=colors[k], alpha=0.35)
    axes[1].fill(pts[:, 0], pts[:, 1], color=colors[k], alpha=0.15)
for r in recon:
    q = np.vstack([r.contour, r.contour[:1]])
    axes[1].plot(q[:, 0], q[:, 1], color=colors[r.surface_index], lw=2)
for k, p in enumerate(clusters.unique_points):
    axes[0].annotate(str(label[k]), p, fontsize=9)
axes[0].set_title("segmented faces")
axes[1].set_title("completed contours")
for ax in axes:
    ax.set_aspect("equal")
axes[0].invert_yaxis()
fig.tight_layout()
fig.savefig(out / "segment_and_reconstruct.png", dpi=120)
print("wrote", out / "segment_and_reconstruct.png")
