import json
from pathlib import Path

import numpy as np
import pytest

from cartonsynth.annotations import SkeletonRecord, record_to_json
from cartonsynth.images import write_png
from cartonsynth.segmentation import signed_area
from cartonsynth.synthetic import CARTON_CLICKS, random_scene, write_texture_library


def carton_labels(clusters):
    """cluster index -> point label of the illustrated carton."""
    return {k: CARTON_CLICKS[g[0]] for k, g in enumerate(clusters.groups)}


def cyclic_equal(a, b):
    a, b = list(a), list(b)
    if len(a) != len(b):
        return False
    return any(a[i:] + a[:i] == b for i in range(len(a)))


def same_polygon(a, b, tol):
    """True if ``b`` is a cyclic rotation of ``a`` within ``tol`` per coordinate."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.shape != b.shape:
        return False
    return any(np.all(np.abs(np.roll(a, -k, axis=0) - b) <= tol) for k in range(len(a)))


def oracle_parallelogram_areas(contour, tol=1e-6):
    """Area of the anchored parallelogram for every admissible corner, via support lines.

    Each corner ``i + 1`` contributes two strips bounded by the edge lines
    and the parallel support lines on the far side; the strips' widths and
    the angle between their normals give the area. ``None`` marks corners
    whose edges are not one-sided.
    """
    p = np.asarray(contour, float)
    n = len(p)
    out = []
    for i in range(n):
        a, b, c = p[i], p[(i + 1) % n], p[(i + 2) % n]
        normals = []
        widths = []
        for u, v in ((a, b), (b, c)):
            d = v - u
            nrm = np.array([d[1], -d[0]]) / np.hypot(*d)
            s = (p - u) @ nrm
            if not (np.all(s >= -tol) or np.all(s <= tol)):
                break
            normals.append(nrm)
            widths.append(np.abs(s).max())
        if len(normals) < 2:
            out.append(None)
            continue
        sin = abs(normals[0][0] * normals[1][1] - normals[0][1] * normals[1][0])
        out.append(widths[0] * widths[1] / sin if sin > 1e-12 else None)
    return out


def random_quad(rng, lo=0.0, hi=500.0):
    """Clockwise convex quad with a healthy area and no near-collinear triple."""
    while True:
        c = rng.uniform(lo + 100, hi - 100, size=2)
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=4))
        if np.min(np.diff(np.append(angles, angles[0] + 2 * np.pi))) < 0.4:
            continue
        r = rng.uniform(40, 100, size=4)
        q = c + np.column_stack([r * np.cos(angles), r * np.sin(angles)])
        e = np.roll(q, -1, axis=0) - q
        turns = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if signed_area(q) > 2000 and np.all(turns > 0):
            return q


def write_skeleton_dir(directory: Path, image: np.ndarray, record: SkeletonRecord, name="scene"):
    directory.mkdir(parents=True, exist_ok=True)
    write_png(directory / f"{name}.png", image)
    doc = record_to_json(SkeletonRecord(f"{name}.png", record.width, record.height, record.instances))
    (directory / f"{name}.json").write_text(json.dumps(doc))
    return directory


@pytest.fixture
def texture_dir(tmp_path):
    lib, manifest = write_texture_library(tmp_path / "textures", np.random.default_rng(3), counts=(3, 2, 2))
    return lib, manifest


@pytest.fixture
def small_scene(tmp_path):
    image, record = random_scene(np.random.default_rng(11), 480, 320, rows=1, cols=3)
    skel = write_skeleton_dir(tmp_path / "skeletons", image, record)
    return image, record, skel


# criterion name -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
