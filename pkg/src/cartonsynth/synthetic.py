"""Synthetic cartons, skeleton scenes and texture patches with known ground truth.

Boxes are built from a visible corner ``c`` and up to three edge rays
running clockwise on screen (up-left, up-right, down); each visible face
is the parallelogram spanned by two neighbouring rays, which is what an
orthographic view of a box corner looks like. Click sequences are Eulerian
circuits over the directed face edges, started at a corner that belongs to
a single face, so they obey the labeling rules by construction.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np

from .annotations import LabeledInstance, Occlusion, Point2D, SkeletonRecord
from .images import write_png
from .segmentation import DEFAULT_PSI, loop_edges, signed_area
from .textures import TextureLibrary, TexturePatch, check_patch_convention

# Corner layout of the three-face carton used to illustrate the labeling
# rules; keys are the point labels, values image coordinates.
CARTON_POINTS = {
    1: (95.0, 220.0),
    2: (100.0, 150.0),
    3: (200.0, 100.0),
    4: (300.0, 150.0),
    5: (200.0, 200.0),
    6: (310.0, 230.0),
    7: (280.0, 300.0),
    8: (200.0, 320.0),
    9: (110.0, 280.0),
}
CARTON_CLICKS = (1, 2, 3, 4, 6, 7, 8, 5, 2, 5, 4, 5, 8, 9)
CARTON_SURFACES = ((2, 3, 4, 5), (4, 6, 7, 8, 5), (1, 2, 5, 8, 9))


def example_carton(inst_id: int = 0, occlusion="All", offset=(0.0, 0.0)) -> LabeledInstance:
    ox, oy = offset
    pts = tuple(Point2D(CARTON_POINTS[k][0] + ox, CARTON_POINTS[k][1] + oy) for k in CARTON_CLICKS)
    return LabeledInstance(inst_id, Occlusion(occlusion), pts)


def eulerian_clicks(loops: Sequence[Sequence[int]], start: int | None = None) -> list[int]:
    """Vertex ids visited by an Eulerian circuit over all directed loop edges.

    The closing edge back to ``start`` is implied and not repeated.
    """
    g = nx.MultiDiGraph()
    for loop in loops:
        g.add_edges_from(loop_edges(loop))
    if start is None:
        counts = {}
        for loop in loops:
            for v in loop:
                counts[v] = counts.get(v, 0) + 1
        start = min(v for v, c in counts.items() if c == 1)
    return [u for u, _ in nx.eulerian_circuit(g, source=start)]


def jitter_points(points: np.ndarray, max_radius: float, rng: np.random.Generator) -> np.ndarray:
    """Displace each point by a vector of uniform length in ``[0, max_radius]``."""
    r = rng.uniform(0.0, max_radius, size=len(points))
    theta = rng.uniform(0.0, 2 * math.pi, size=len(points))
    return points + np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def box_faces(center, rays: Sequence, n_faces: int):
    """Vertices and clockwise face loops of a box corner.

    ``rays`` are three edge vectors from ``center`` in clockwise screen
    order, normally up-left, up-right and down, so the faces are top,
    right and left. One face yields the right face, two faces the left and
    right faces sharing the vertical edge. Returns ``(vertices, loops)``
    with loops indexing ``vertices``.
    """
    c = np.asarray(center, dtype=float)
    r = [np.asarray(v, dtype=float) for v in rays]
    verts = [c, c + r[0], c + r[1], c + r[2], c + r[0] + r[1], c + r[1] + r[2], c + r[2] + r[0]]
    # face spanned by rays (a, b): center, tip a, tip a+b, tip b
    f01 = (0, 1, 4, 2)
    f12 = (0, 2, 5, 3)
    f20 = (0, 3, 6, 1)
    if n_faces == 1:
        loops = [f12]
    elif n_faces == 2:
        loops = [f20, f12]
    elif n_faces == 3:
        loops = [f01, f12, f20]
    else:
        raise ValueError("n_faces must be 1, 2 or 3")
    used = sorted({v for loop in loops for v in loop})
    remap = {v: k for k, v in enumerate(used)}
    vertices = np.array([verts[v] for v in used])
    return vertices, [tuple(remap[v] for v in loop) for loop in loops]


def random_rays(rng: np.random.Generator, scale: float) -> list[np.ndarray]:
    # up-left, up-right, down: a box corner seen from above
    angles = [
        math.radians(rng.uniform(-160, -120)),
        math.radians(rng.uniform(-60, -20)),
        math.radians(rng.uniform(70, 110)),
    ]
    lengths = rng.uniform(0.6, 1.0, size=3) * scale
    return [np.array([l * math.cos(a), l * math.sin(a)]) for a, l in zip(angles, lengths)]


def min_separation(points: np.ndarray) -> float:
    d = np.linalg.norm(points[:, None] - points[None], axis=-1)
    d[np.diag_indices(len(points))] = np.inf
    return float(d.min())


def random_box(
    rng: np.random.Generator,
    n_faces: int,
    center=(0.0, 0.0),
    scale: float = 150.0,
    min_sep: float = 0.0,
    perturb: float = 0.0,
):
    """Random box corner whose distinct vertices are at least ``min_sep`` apart.

    ``perturb`` moves every vertex by up to that many pixels, turning the
    parallelogram faces into general quads (a mild perspective look).
    """
    for _ in range(1000):
        verts, loops = box_faces(center, random_rays(rng, scale), n_faces)
        if perturb:
            verts = jitter_points(verts, perturb, rng)
        if min_separation(verts) > min_sep:
            return verts, loops
    raise RuntimeError("could not satisfy the separation constraint")


def instance_from_loops(
    inst_id: int,
    vertices: np.ndarray,
    loops,
    occlusion="All",
    jitter: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LabeledInstance:
    clicks = eulerian_clicks(loops)
    pts = np.asarray(vertices, dtype=float)[clicks]
    if jitter:
        pts = jitter_points(pts, jitter, rng)
    return LabeledInstance(inst_id, Occlusion(occlusion), tuple(Point2D(*p) for p in pts))


def cut_corner(polygon, k: int, t_prev: float, t_next: float) -> np.ndarray:
    """Replace vertex ``k`` by two points on its adjacent edges.

    ``t_prev`` and ``t_next`` in ``(0, 1)`` are the fractions of the
    adjacent edges removed, measured from the cut vertex.
    """
    p = np.asarray(polygon, dtype=float)
    n = len(p)
    prev, cur, nxt = p[(k - 1) % n], p[k], p[(k + 1) % n]
    a = cur + t_prev * (prev - cur)
    b = cur + t_next * (nxt - cur)
    return np.vstack([p[:k], a, b, p[k + 1 :]])


def random_parallelogram(rng: np.random.Generator, min_area=1e2, max_area=1e5) -> np.ndarray:
    """Clockwise parallelogram with area drawn log-uniformly in the given range."""
    while True:
        area = math.exp(rng.uniform(math.log(min_area), math.log(max_area)))
        theta = rng.uniform(0, 2 * math.pi)
        shear = rng.uniform(math.radians(30), math.radians(150))
        ratio = rng.uniform(0.3, 3.0)
        # |u||v|sin(shear) = area
        lu = math.sqrt(area * ratio / math.sin(shear))
        lv = area / (lu * math.sin(shear))
        u = lu * np.array([math.cos(theta), math.sin(theta)])
        v = lv * np.array([math.cos(theta + shear), math.sin(theta + shear)])
        origin = rng.uniform(0, 500, size=2)
        quad = np.array([origin, origin + u, origin + u + v, origin + v])
        if signed_area(quad) > 0:
            return quad


# -- scenes and textures ---------------------------------------------------


def textured_canvas(width: int, height: int, rng: np.random.Generator, cell: int = 24) -> np.ndarray:
    """Blocky random-color image; cheap to make and easy to eyeball after warping."""
    gh, gw = -(-height // cell), -(-width // cell)
    colors = rng.integers(40, 216, size=(gh, gw, 3), dtype=np.uint8)
    img = np.repeat(np.repeat(colors, cell, axis=0), cell, axis=1)[:height, :width]
    stripes = ((np.arange(width) // 6) % 2).astype(np.uint8) * 30
    return np.clip(img.astype(int) + stripes[None, :, None], 0, 255).astype(np.uint8)


def random_scene(
    rng: np.random.Generator,
    width: int,
    height: int,
    rows: int,
    cols: int,
    image_path: str = "scene.png",
    occlusion_rate: float = 0.0,
    min_sep: float = 2 * DEFAULT_PSI,
) -> tuple[np.ndarray, SkeletonRecord]:
    """A background raster plus one box instance per grid cell.

    Corners of a box are at least ``min_sep`` apart so the default merge
    radius never joins distinct corners; cells must be large enough for that.
    """
    image = textured_canvas(width, height, rng, cell=32)
    cw, ch = width / cols, height / rows
    # faces reach 1.74*scale above the corner, 1.0*scale below it and
    # 1.28*scale to either side
    scale = min(0.3 * ch, 0.38 * cw)
    instances = []
    for r in range(rows):
        for c in range(cols):
            n_faces = int(rng.integers(1, 4))
            center = (cw * (c + 0.5), ch * (r + 0.5) + 0.37 * scale)
            verts, loops = random_box(rng, n_faces, center, scale, min_sep=min_sep)
            occ = "Occlusion" if rng.random() < occlusion_rate else "All"
            instances.append(instance_from_loops(len(instances), verts, loops, occ))
    return image, SkeletonRecord(image_path, width, height, tuple(instances))


def texture_patch_quads(n_faces: int, size: int):
    """Face quads for a square texture image of side ``size``, in library order."""
    s = float(size)
    if n_faces == 1:
        return [np.array([[0, 0], [s, 0], [s, s], [0, s]])]
    if n_faces == 2:
        h = s / 2
        # left face walks the shared edge downward
        q0 = np.array([[h, 0], [h, s], [0, s], [0, 0]])
        q1 = np.array([[h, s], [h, 0], [s, 0], [s, s]])
        return [q0, q1]
    verts, loops = box_faces((s / 2, s / 2), [(-s / 2, -s / 4), (s / 2, -s / 4), (0, s / 2)], 3)
    return [verts[list(loop)] for loop in loops]


def write_texture_library(
    directory, rng: np.random.Generator, counts=(1, 1, 1), size: int = 96
) -> tuple[TextureLibrary, Path]:
    """Write PNG patches and a manifest; returns the library and manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    patches = []
    entries = []
    pid = 0
    for n_faces, count in zip((1, 2, 3), counts):
        for _ in range(count):
            name = f"patch_{pid:04d}.png"
            write_png(directory / name, textured_canvas(size, size, rng, cell=max(4, size // 8)))
            quads = texture_patch_quads(n_faces, size)
            check_patch_convention(pid, quads)
            patches.append(TexturePatch(pid, str(directory / name), n_faces, tuple(quads)))
            entries.append(
                {
                    "id": pid,
                    "image": name,
                    "surface_count": n_faces,
                    "surface_quads": [q.tolist() for q in quads],
                }
            )
            pid += 1
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"patches": entries}, indent=1))
    subsets = {k: tuple(p for p in patches if p.surface_count == k) for k in (1, 2, 3)}
    return TextureLibrary(subsets), manifest
