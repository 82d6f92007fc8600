"""End-to-end synthesis: skeleton records in, textured images and annotations out.

Random streams are derived from the master seed by counter, never by
drawing from a shared generator, so results do not depend on scheduling::

    image i          SeedSequence(seed, spawn_key=(i,))
    instance j of i  SeedSequence(seed, spawn_key=(i, j))

The image stream picks the skeleton record; each instance stream decides
noise versus texture, samples the patch and generates noise pixels.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .annotations import SkeletonRecord, load_skeleton_dir
from .errors import CartonSynthError, ConfigError, ReconstructionError, SegmentationError
from .images import png_bytes, read_rgb
from .reconstruction import DEFAULT_GAMMA, ReconstructedSurface, reconstruct_surfaces
from .segmentation import DEFAULT_PSI, SurfaceSet, loop_edges, segment_instance
from .textures import TextureLibrary, load_texture_library, make_noise_patch, sample_patch
from .warp import (
    Layer,
    compose,
    feathered_alpha,
    polygon_crop,
    rasterize_quad_mask,
    solve_homography,
    warp_texture,
)

log = logging.getLogger(__name__)

LOOP_COLORS = ((0, 0, 255), (0, 255, 0), (255, 0, 0))


@dataclass(frozen=True)
class SynthesisConfig:
    psi: float = DEFAULT_PSI
    gamma: float = DEFAULT_GAMMA
    noise_prob: float = 0.2
    fusion_sigma: float = 2.0
    count: int = 1
    seed: int = 0
    skeleton_dir: str | None = None
    texture_manifest: str | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.noise_prob <= 1.0:
            raise ConfigError(f"noise_prob must lie in [0, 1], got {self.noise_prob}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.psi > 0:
            raise ConfigError(f"psi must be positive, got {self.psi}")
        if not self.fusion_sigma >= 0:
            raise ConfigError(f"fusion_sigma must be non-negative, got {self.fusion_sigma}")
        if int(self.count) != self.count or self.count < 1:
            raise ConfigError(f"count must be a positive integer, got {self.count}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def from_json(cls, path) -> SynthesisConfig:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def override(self, **changes) -> SynthesisConfig:
        """Copy with every non-``None`` keyword applied."""
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def public(self) -> dict:
        """Fields that influence the generated pixels (no paths)."""
        return {k: getattr(self, k) for k in ("psi", "gamma", "noise_prob", "fusion_sigma", "count", "seed")}


def image_seed(seed: int, image_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(image_index,))


def child_seed(parent: np.random.SeedSequence, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(parent.entropy, spawn_key=tuple(parent.spawn_key) + (index,))


# -- face correspondence ---------------------------------------------------


def _rotate_to(quad: np.ndarray, point) -> np.ndarray:
    k = int(np.argmin(np.linalg.norm(quad - np.asarray(point), axis=1)))
    return np.roll(quad, -k, axis=0)


def order_faces(
    surfaces: SurfaceSet, recon: Sequence[ReconstructedSurface]
) -> list[tuple[int, np.ndarray]]:
    """Skeleton faces as ``(loop index, quad)`` in texture-library order.

    Mirrors the patch convention of :mod:`cartonsynth.textures`: a single
    quad starts at its top-left corner; two faces start on the common line
    with the ``dy > dx`` walker first; three faces start at the shared
    corner, top face first, then clockwise.

    Raises:
        ReconstructionError: a contour does not have four corners.
        SegmentationError: the faces do not share lines as a box does.
    """
    verts = surfaces.vertices
    quads = {r.surface_index: r.contour for r in recon}
    for k, q in quads.items():
        if len(q) != 4:
            # an unoccluded contour is kept as labeled, even if it is not a quad
            raise ReconstructionError(
                f"contour has {len(q)} corners; texture mapping needs 4", surfaces.instance_id, k
            )
    n = len(surfaces.loops)
    if n == 1:
        q = quads[0]
        k = int(np.argmin(q[:, 0] + q[:, 1]))
        return [(0, np.roll(q, -k, axis=0))]
    if n == 2:
        if len(surfaces.common_lines) != 1:
            raise SegmentationError(f"instance {surfaces.instance_id}: two faces need one common line")
        (u, v), = surfaces.common_lines
        faces = []
        for k, loop in enumerate(surfaces.loops):
            a, b = (u, v) if (u, v) in loop_edges(loop) else (v, u)
            d = verts[b] - verts[a]
            faces.append((d[1] > d[0], k, _rotate_to(quads[k], verts[a])))
        faces.sort(key=lambda f: not f[0])
        return [(k, q) for _, k, q in faces]
    shared = set(surfaces.loops[0]).intersection(*surfaces.loops[1:])
    if not shared:
        raise SegmentationError(f"instance {surfaces.instance_id}: three faces share no corner")
    center = verts[min(shared)]
    faces = []
    for k in range(n):
        q = _rotate_to(quads[k], center)
        c = q.mean(axis=0) - center
        faces.append((k, q, math.atan2(c[1], c[0]), q.mean(axis=0)[1]))
    top = min(faces, key=lambda f: f[3])
    faces.sort(key=lambda f: (f[2] - top[2]) % (2 * math.pi))
    return [(k, q) for k, q, _, _ in faces]


# -- per-image synthesis ---------------------------------------------------


@dataclass
class InstanceAnnotation:
    id: int
    occlusion: str
    bbox: tuple[float, float, float, float]
    points: list
    surfaces: list = field(default_factory=list)

    def to_json(self) -> dict:
        return dataclasses.asdict(self) | {"bbox": list(self.bbox)}


@dataclass
class OutputAnnotation:
    image: str
    width: int
    height: int
    instances: list[InstanceAnnotation]

    def to_json(self) -> dict:
        return {
            "image": self.image,
            "width": self.width,
            "height": self.height,
            "instances": [i.to_json() for i in self.instances],
        }


@dataclass
class ProvenanceEntry:
    image: str
    skeleton: str
    skeleton_index: int
    spawn_key: list[int]
    instances: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def instance_geometry(inst, cfg: SynthesisConfig):
    """Segmentation and reconstruction of one instance."""
    clusters, surfaces = segment_instance(inst, cfg.psi)
    recon = reconstruct_surfaces(surfaces, clusters, inst.occlusion, cfg.gamma)
    return clusters, surfaces, recon


def _noise_texture(quad: np.ndarray, rng: np.random.Generator):
    span = np.ptp(quad, axis=0)
    w, h = max(1, int(math.ceil(span[0]))), max(1, int(math.ceil(span[1])))
    tex = make_noise_patch(w, h, rng)
    return tex, np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=float)


def synthesize_image(
    record: SkeletonRecord,
    lib: TextureLibrary,
    cfg: SynthesisConfig,
    rng: np.random.SeedSequence | np.random.Generator,
    source: np.ndarray | None = None,
    image_name: str = "",
    skeleton_index: int = 0,
):
    """Replace the texture of every instance in ``record``.

    Returns ``(raster, OutputAnnotation, ProvenanceEntry)``. An instance
    failing at any stage keeps its original pixels and is listed under
    ``failures``.
    """
    if isinstance(rng, np.random.Generator):
        seq = rng.bit_generator.seed_seq
    else:
        seq = rng
    if source is None:
        source = read_rgb(record.image_path)
    height, width = source.shape[:2]
    if (width, height) != (record.width, record.height):
        raise CartonSynthError(
            f"{record.image_path}: image is {width}x{height}, record says "
            f"{record.width}x{record.height}"
        )
    pad = int(math.ceil(3 * cfg.fusion_sigma)) + 1
    layers: list[Layer] = []
    annotations = []
    prov = ProvenanceEntry(image_name, record.image_path, skeleton_index, list(seq.spawn_key))
    for j, inst in enumerate(record.instances):
        inst_rng = np.random.default_rng(child_seed(seq, j))
        use_noise = bool(inst_rng.random() < cfg.noise_prob)
        ann = InstanceAnnotation(
            inst.id, inst.occlusion.value, inst.bbox(), [list(p) for p in inst.points]
        )
        annotations.append(ann)
        try:
            _, surfaces, recon = instance_geometry(inst, cfg)
            faces = order_faces(surfaces, recon)
            sources = {r.surface_index: r.source.value for r in recon}
            if use_noise:
                textures = [_noise_texture(q, inst_rng) for _, q in faces]
                texture_id = "noise"
            else:
                patch = sample_patch(lib, len(faces), inst_rng)
                image = patch.image()
                textures = [(image, q) for q in patch.surface_quads]
                texture_id = patch.id
            inst_layers = []
            surf_prov = []
            for (k, quad), (tex, tquad) in zip(faces, textures):
                m = solve_homography(tquad, quad)
                visible = surfaces.loop_points(k)
                x0, y0, w, h = polygon_crop(visible, width, height, pad)
                mask = rasterize_quad_mask(visible, w, h, origin=(x0, y0))
                warped = warp_texture(tex, m, mask, origin=(x0, y0))
                inst_layers.append(Layer(warped, feathered_alpha(mask, cfg.fusion_sigma), (x0, y0)))
                surf_prov.append(
                    {
                        "loop": list(surfaces.loops[k]),
                        "source": sources[k],
                        "homography": m.matrix.tolist(),
                    }
                )
                ann.surfaces.append(quad.tolist())
        except CartonSynthError as exc:
            log.info("instance %s of %s skipped: %s", inst.id, record.image_path, exc)
            ann.surfaces.clear()
            prov.failures.append(
                {"instance_id": inst.id, "error": type(exc).__name__, "message": str(exc)}
            )
            continue
        layers.extend(inst_layers)
        prov.instances.append(
            {"instance_id": inst.id, "texture": texture_id, "surfaces": surf_prov}
        )
    out = compose(source, layers)
    return out, OutputAnnotation(image_name, width, height, annotations), prov


# -- batch generation ------------------------------------------------------

_WORKER: dict = {}


def _init_worker(records, lib, cfg):
    _WORKER.update(records=records, lib=lib, cfg=cfg)


def _generate_one(i: int):
    records, lib, cfg = _WORKER["records"], _WORKER["lib"], _WORKER["cfg"]
    seq = image_seed(cfg.seed, i)
    idx = int(np.random.default_rng(seq).integers(len(records)))
    name = f"{i:06d}.png"
    raster, ann, prov = synthesize_image(records[idx], lib, cfg, seq, image_name=name, skeleton_index=idx)
    return name, png_bytes(raster), ann.to_json(), prov.to_json()


def _required_counts(records, cfg) -> set[int]:
    counts = set()
    for r in records:
        for inst in r.instances:
            try:
                _, surfaces = segment_instance(inst, cfg.psi)
            except CartonSynthError:
                continue
            counts.add(len(surfaces.loops))
    return counts


def load_inputs(cfg: SynthesisConfig):
    """Records and texture library, checked before anything is written."""
    if not cfg.skeleton_dir or not Path(cfg.skeleton_dir).is_dir():
        raise ConfigError(f"skeleton directory {cfg.skeleton_dir!r} does not exist")
    try:
        records = load_skeleton_dir(cfg.skeleton_dir)
    except CartonSynthError as exc:
        raise ConfigError(f"bad skeleton annotations: {exc}") from None
    if not records:
        raise ConfigError(f"no skeleton records in {cfg.skeleton_dir}")
    if not cfg.texture_manifest:
        raise ConfigError("no texture manifest given")
    try:
        lib = load_texture_library(cfg.texture_manifest)
    except (OSError, CartonSynthError) as exc:
        raise ConfigError(f"bad texture manifest: {exc}") from None
    if cfg.noise_prob < 1.0:
        missing = sorted(c for c in _required_counts(records, cfg) if not lib.subsets.get(c))
        if missing:
            raise ConfigError(f"texture library has no patches with {missing} surfaces")
    for r in records:
        if not Path(r.image_path).is_file():
            raise ConfigError(f"skeleton image {r.image_path} not found")
    return records, lib


def _skeleton_name(path: str, base: str) -> str:
    try:
        return str(Path(path).resolve().relative_to(Path(base).resolve()))
    except ValueError:
        return Path(path).name


def run_generation(cfg: SynthesisConfig, jobs: int = 1) -> dict:
    """Generate ``cfg.count`` images into ``cfg.output_dir``.

    Writes ``images/NNNNNN.png``, ``annotations.json`` and
    ``provenance.json`` and returns the provenance document. Output bytes
    depend only on the config, not on ``jobs``.
    """
    if not cfg.output_dir:
        raise ConfigError("no output directory given")
    records, lib = load_inputs(cfg)
    out = Path(cfg.output_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)

    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(records, lib, cfg)) as pool:
            results = pool.map(_generate_one, range(cfg.count), chunksize=max(1, cfg.count // (4 * jobs)))
            manifest = _write_outputs(out, results, cfg)
    else:
        _init_worker(records, lib, cfg)
        manifest = _write_outputs(out, map(_generate_one, range(cfg.count)), cfg)
    return manifest


def _write_outputs(out: Path, results, cfg: SynthesisConfig) -> dict:
    annotations, images = [], []
    for name, png, ann, prov in results:
        (out / "images" / name).write_bytes(png)
        prov["skeleton"] = _skeleton_name(prov["skeleton"], cfg.skeleton_dir)
        annotations.append(ann)
        images.append(prov)
    manifest = {
        "config": cfg.public(),
        "rng": "image i: SeedSequence(seed, spawn_key=(i,)); instance j: spawn_key=(i, j)",
        "images": images,
    }
    (out / "annotations.json").write_text(json.dumps(annotations, indent=1))
    (out / "provenance.json").write_text(json.dumps(manifest, indent=1))
    return manifest


# -- diagnostics -----------------------------------------------------------


def _draw_polygons(base: np.ndarray, polygons, fill_alpha: float = 0.35) -> np.ndarray:
    canvas = Image.fromarray(np.ascontiguousarray(base)).convert("RGBA")
    layer = Image.new("RGBA", canvas.size, (0, 0, 0, 0))
    draw = ImageDraw.Draw(layer)
    for pts, color in polygons:
        xy = [tuple(p) for p in np.asarray(pts, dtype=float)]
        draw.polygon(xy, fill=color + (int(255 * fill_alpha),))
        draw.line(xy + xy[:1], fill=color + (255,), width=2)
    return np.asarray(Image.alpha_composite(canvas, layer).convert("RGB"))


def segmentation_overlay(base: np.ndarray, geometry) -> np.ndarray:
    polys = [
        (surfaces.loop_points(k), LOOP_COLORS[k % 3])
        for surfaces, _ in geometry
        for k in range(len(surfaces.loops))
    ]
    return _draw_polygons(base, polys) if polys else base.copy()


def reconstruction_overlay(base: np.ndarray, geometry) -> np.ndarray:
    polys = [
        (r.contour, LOOP_COLORS[r.surface_index % 3]) for _, recon in geometry for r in recon
    ]
    return _draw_polygons(base, polys, fill_alpha=0.0) if polys else base.copy()


def record_geometry(record: SkeletonRecord, cfg: SynthesisConfig):
    """``[(SurfaceSet, [ReconstructedSurface])]`` plus failures for a record."""
    ok, failed = [], []
    for inst in record.instances:
        try:
            _, surfaces, recon = instance_geometry(inst, cfg)
        except CartonSynthError as exc:
            failed.append((inst.id, exc))
            continue
        ok.append((surfaces, recon))
    return ok, failed


def render_overlays(record: SkeletonRecord, cfg: SynthesisConfig, source: np.ndarray | None = None):
    """Segmentation and reconstruction diagnostics over the source image.

    Loops are filled blue, green, red in discovery order; reconstructed
    quads are outlined in the same colors.
    """
    if source is None:
        source = np.array(read_rgb(record.image_path))
    geometry, _ = record_geometry(record, cfg)
    return segmentation_overlay(source, geometry), reconstruction_overlay(source, geometry)


def surfaces_to_json(surfaces: SurfaceSet) -> dict:
    return {
        "instance_id": surfaces.instance_id,
        "loops": [list(l) for l in surfaces.loops],
        "loop_points": [surfaces.loop_points(k).tolist() for k in range(len(surfaces.loops))],
        "common_lines": [list(c) for c in surfaces.common_lines],
    }


def reconstruction_to_json(surfaces: SurfaceSet, recon) -> dict:
    return {
        "instance_id": surfaces.instance_id,
        "quads": [
            {"surface_index": r.surface_index, "source": r.source.value, "contour": r.contour.tolist()}
            for r in recon
        ],
    }

