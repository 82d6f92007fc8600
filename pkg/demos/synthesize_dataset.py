"""Build a tiny synthetic dataset end to end.

We make a texture library and a few skeleton scenes (background image plus
box annotations), run the generator, and tile the results next to the
diagnostic overlays.

Run:  python demos/synthesize_dataset.py [out_dir]
"""

import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cartonsynth.annotations import SkeletonRecord, load_skeleton_file, record_to_json
from cartonsynth.images import read_rgb, write_png
from cartonsynth.pipeline import SynthesisConfig, render_overlays, run_generation
from cartonsynth.synthetic import random_scene, write_texture_library

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "dataset"
rng = np.random.default_rng(1)

_, manifest = write_texture_library(out / "textures", rng, counts=(4, 3, 3), size=128)
skeletons = out / "skeletons"
skeletons.mkdir(parents=True, exist_ok=True)
for k in range(2):
    image, record = random_scene(rng, 640, 480, 2, 3, occlusion_rate=0.3)
    write_png(skeletons / f"scene{k}.png", image)
    doc = record_to_json(SkeletonRecord(f"scene{k}.png", record.width, record.height, record.instances))
    (skeletons / f"scene{k}.json").write_text(json.dumps(doc))

cfg = SynthesisConfig(
    count=6, seed=3, skeleton_dir=str(skeletons), texture_manifest=str(manifest),
    output_dir=str(out / "generated"),
)
prov = run_generation(cfg)
for img in prov["images"]:
    kinds = [e["texture"] for e in img["instances"]]
    print(img["image"], "from", img["skeleton"], "textures:", kinds)

# Same drawing as `cartonsynth overlay`, done in-process for the first scene.
record = load_skeleton_file(skeletons / "scene0.json")[0]
seg, rec = render_overlays(record, cfg)

fig, axes = plt.subplots(2, 2, figsize=(10, 7.5))
panels = [
    (read_rgb(record.image_path), "skeleton image"),
    (seg, "segmentation overlay"),
    (rec, "reconstruction overlay"),
    (read_rgb(out / "generated" / "images" / "000000.png"), "generated 000000.png"),
]
for ax, (img, title) in zip(axes.flat, panels):
    ax.imshow(img)
    ax.set_title(title)
    ax.axis("off")
fig.tight_layout()
fig.savefig(out / "overview.png", dpi=110)
print("wrote", out / "overview.png")
