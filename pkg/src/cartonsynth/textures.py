"""Foreground texture patches, grouped by how many carton faces they show.

Manifest layout (UTF-8 JSON)::

    {"patches": [{"id": 0, "image": "tex/0000.png", "surface_count": 2,
                  "surface_quads": [[[x, y], [x, y], [x, y], [x, y]], ...]}]}

Quads are in texture pixel coordinates and run clockwise on screen. Their
order follows a fixed convention so that a patch can be mapped onto a
skeleton instance face by face:

* one face: the quad starts at its top-left corner;
* two faces: both quads start on the shared edge, ``q0[0] == q1[1]`` and
  ``q0[1] == q1[0]``. ``q0`` is the face that walks the shared edge with
  ``dy > dx`` (the left face of a side-by-side pair, the upper face of a
  stacked pair);
* three faces: every quad starts at the corner shared by all three faces,
  ``q0`` is the top face and the others follow clockwise around that
  corner, so ``q[k][3] == q[k+1][1]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import SamplingError, TextureLoadError
from .images import read_rgb
from .segmentation import signed_area

SHARED_TOL = 1e-6


@dataclass(frozen=True)
class TexturePatch:
    id: int
    image_path: str
    surface_count: int
    surface_quads: tuple[np.ndarray, ...]

    def image(self) -> np.ndarray:
        return read_rgb(self.image_path)


@dataclass(frozen=True)
class TextureLibrary:
    subsets: Mapping[int, tuple[TexturePatch, ...]] = field(
        default_factory=lambda: {1: (), 2: (), 3: ()}
    )

    def __len__(self) -> int:
        return sum(len(s) for s in self.subsets.values())

    def patches(self):
        for count in (1, 2, 3):
            yield from self.subsets.get(count, ())


def _same(p, q) -> bool:
    return bool(np.all(np.abs(np.asarray(p) - np.asarray(q)) <= SHARED_TOL))


def check_patch_convention(patch_id, quads) -> None:
    """Raise :class:`TextureLoadError` if the quads break the face ordering."""
    for k, q in enumerate(quads):
        area = signed_area(q)
        if area == 0:
            raise TextureLoadError(f"quad {k} is degenerate", patch_id)
        if area < 0:
            raise TextureLoadError(f"quad {k} is counter-clockwise", patch_id)
    if len(quads) == 2:
        q0, q1 = quads
        if not (_same(q0[0], q1[1]) and _same(q0[1], q1[0])):
            raise TextureLoadError("two-face quads must start on their shared edge", patch_id)
    elif len(quads) == 3:
        for k in range(3):
            if not _same(quads[k][0], quads[0][0]):
                raise TextureLoadError("three-face quads must start at the shared corner", patch_id)
            if not _same(quads[k][3], quads[(k + 1) % 3][1]):
                raise TextureLoadError(f"quads {k} and {(k + 1) % 3} do not share an edge", patch_id)


def _patch_from_json(obj, base_dir: Path | None, check_files: bool) -> TexturePatch:
    try:
        pid = obj["id"]
        image = obj["image"]
        count = obj["surface_count"]
        raw_quads = obj["surface_quads"]
    except (KeyError, TypeError) as exc:
        raise TextureLoadError(f"missing field {exc}", obj.get("id") if isinstance(obj, dict) else None)
    if count not in (1, 2, 3):
        raise TextureLoadError(f"surface_count must be 1, 2 or 3, got {count!r}", pid)
    if len(raw_quads) != count:
        raise TextureLoadError(
            f"surface_count is {count} but {len(raw_quads)} quads are given", pid
        )
    quads = []
    for k, q in enumerate(raw_quads):
        arr = np.asarray(q, dtype=float)
        if arr.shape != (4, 2):
            raise TextureLoadError(f"quad {k} must have 4 [x, y] points", pid)
        arr.flags.writeable = False
        quads.append(arr)
    check_patch_convention(pid, quads)
    path = Path(image)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if check_files and not path.is_file():
        raise TextureLoadError(f"image file {str(path)!r} not found", pid)
    return TexturePatch(pid, str(path), count, tuple(quads))


def load_texture_manifest(data: bytes, base_dir=None, check_files: bool = True) -> TextureLibrary:
    """Build a library from manifest bytes; image paths resolve against ``base_dir``."""
    try:
        doc = json.loads(data.decode("utf-8"))
        entries = doc["patches"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise TextureLoadError(f"unreadable manifest: {exc}") from None
    base = Path(base_dir) if base_dir is not None else None
    subsets: dict[int, list[TexturePatch]] = {1: [], 2: [], 3: []}
    seen = set()
    for obj in entries:
        patch = _patch_from_json(obj, base, check_files)
        if patch.id in seen:
            raise TextureLoadError("duplicate patch id", patch.id)
        seen.add(patch.id)
        subsets[patch.surface_count].append(patch)
    return TextureLibrary({k: tuple(v) for k, v in subsets.items()})


def load_texture_library(path, check_files: bool = True) -> TextureLibrary:
    path = Path(path)
    return load_texture_manifest(path.read_bytes(), path.parent, check_files)


def manifest_to_json(lib: TextureLibrary, base_dir=None) -> dict:
    def rel(p):
        if base_dir is None:
            return p
        try:
            return str(Path(p).relative_to(base_dir))
        except ValueError:
            return p

    return {
        "patches": [
            {
                "id": p.id,
                "image": rel(p.image_path),
                "surface_count": p.surface_count,
                "surface_quads": [q.tolist() for q in p.surface_quads],
            }
            for p in lib.patches()
        ]
    }


def sample_patch(lib: TextureLibrary, surface_count: int, rng: np.random.Generator) -> TexturePatch:
    subset = lib.subsets.get(surface_count, ())
    if not subset:
        raise SamplingError(f"no texture patches with {surface_count} surfaces")
    return subset[int(rng.integers(len(subset)))]


def make_noise_patch(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    """IID uniform 8-bit RGB noise, shape ``(height, width, 3)``."""
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
