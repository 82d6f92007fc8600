"""Skeleton annotation schema: clicked point sequences of labeled cartons.

A skeleton document is UTF-8 JSON describing one source image::

    {"image": "frame_0001.png", "width": 1000, "height": 800,
     "instances": [{"id": 0, "occlusion": "All",
                    "points": [[x, y], ...]}]}

A file may also hold a JSON array of such objects. Coordinates are
floating-point pixels with the origin at the top-left corner and ``y``
growing downward.

The point sequence of an instance is read as a directed edge list: each
consecutive pair is an edge and the last point connects back to the first.
Faceted points (corners shared by several surfaces) are clicked once per
surface that touches them, and common lines are clicked twice, once in
each direction.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .errors import AnnotationParseError, AnnotationValidationError


class Point2D(NamedTuple):
    x: float
    y: float


class Occlusion(str, enum.Enum):
    ALL = "All"
    OCCLUSION = "Occlusion"


@dataclass(frozen=True)
class LabeledInstance:
    """One carton: its clicked sequence and occlusion tag."""

    id: int
    occlusion: Occlusion
    points: tuple[Point2D, ...]

    def __post_init__(self):
        pts = tuple(Point2D(float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "occlusion", Occlusion(self.occlusion))
        if len(pts) < 3:
            raise AnnotationValidationError(
                f"points length >= 3 violated (got {len(pts)})", self.id
            )
        for k, (x, y) in enumerate(pts):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise AnnotationValidationError(f"point {k} is not finite", self.id)
        # the wrap-around edge counts, so the check is cyclic
        for k in range(len(pts)):
            if pts[k] == pts[(k + 1) % len(pts)]:
                raise AnnotationValidationError(
                    f"zero-length edge between points {k} and {(k + 1) % len(pts)}",
                    self.id,
                )

    def bbox(self) -> tuple[float, float, float, float]:
        xs = [p.x for p in self.points]
        ys = [p.y for p in self.points]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class SkeletonRecord:
    image_path: str
    width: int
    height: int
    instances: tuple[LabeledInstance, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.width < 1 or self.height < 1:
            raise AnnotationValidationError(
                f"image size must be positive, got {self.width}x{self.height}"
            )
        for inst in self.instances:
            for k, (x, y) in enumerate(inst.points):
                if not (0 <= x <= self.width and 0 <= y <= self.height):
                    raise AnnotationValidationError(
                        f"point {k} ({x}, {y}) outside image "
                        f"[0,{self.width}]x[0,{self.height}]",
                        inst.id,
                    )


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _require(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise AnnotationParseError(f"{where}: missing key {key!r}")
    value = obj[key]
    # bool is an int subclass; reject it explicitly
    if not isinstance(value, kind) or isinstance(value, bool):
        raise AnnotationParseError(f"{where}: {key!r} has wrong type {type(value).__name__}")
    return value


def _instance_from_json(obj, where: str) -> LabeledInstance:
    inst_id = _require(obj, "id", int, where)
    occ = _require(obj, "occlusion", str, where)
    try:
        occlusion = Occlusion(occ)
    except ValueError:
        raise AnnotationParseError(f"{where}: unknown occlusion tag {occ!r}") from None
    raw = _require(obj, "points", list, where)
    points = []
    for k, p in enumerate(raw):
        if (
            not isinstance(p, list)
            or len(p) != 2
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p)
        ):
            raise AnnotationParseError(f"{where}: point {k} is not an [x, y] pair")
        points.append(Point2D(float(p[0]), float(p[1])))
    return LabeledInstance(inst_id, occlusion, tuple(points))


def _record_from_json(obj, where: str) -> SkeletonRecord:
    image = _require(obj, "image", str, where)
    width = _require(obj, "width", int, where)
    height = _require(obj, "height", int, where)
    raw = _require(obj, "instances", list, where)
    instances = [_instance_from_json(o, f"{where}.instances[{k}]") for k, o in enumerate(raw)]
    return SkeletonRecord(image, width, height, tuple(instances))


def parse_skeleton_annotations(data: bytes) -> list[SkeletonRecord]:
    """Parse a skeleton annotation document.

    Raises:
        AnnotationParseError: the bytes are not valid UTF-8 JSON in the
            documented layout. ``offset`` carries the byte position when
            the failure is syntactic.
        AnnotationValidationError: a record or instance breaks an
            invariant (too few points, zero-length edge, point outside
            the image).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise AnnotationParseError("invalid UTF-8", exc.start) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(exc.msg, _byte_offset(text, exc.pos)) from None
    if isinstance(doc, dict):
        return [_record_from_json(doc, "record")]
    if isinstance(doc, list):
        return [_record_from_json(o, f"record[{k}]") for k, o in enumerate(doc)]
    raise AnnotationParseError("top level must be an object or an array of objects", 0)


def record_to_json(record: SkeletonRecord) -> dict:
    return {
        "image": record.image_path,
        "width": record.width,
        "height": record.height,
        "instances": [
            {
                "id": inst.id,
                "occlusion": inst.occlusion.value,
                "points": [[p.x, p.y] for p in inst.points],
            }
            for inst in record.instances
        ],
    }


def serialize_skeleton_annotations(records: Sequence[SkeletonRecord]) -> bytes:
    """Inverse of :func:`parse_skeleton_annotations`.

    A single record is written as a bare object, several as an array.
    """
    docs = [record_to_json(r) for r in records]
    payload = docs[0] if len(docs) == 1 else docs
    return json.dumps(payload, indent=2).encode("utf-8")


def load_skeleton_file(path) -> list[SkeletonRecord]:
    """Read one annotation file, resolving image paths against its folder."""
    path = Path(path)
    records = parse_skeleton_annotations(path.read_bytes())
    resolved = []
    for r in records:
        img = Path(r.image_path)
        if not img.is_absolute():
            img = path.parent / img
        resolved.append(SkeletonRecord(str(img), r.width, r.height, r.instances))
    return resolved


def load_skeleton_dir(directory) -> list[SkeletonRecord]:
    """All records from ``*.json`` files in ``directory``, sorted by file name."""
    records: list[SkeletonRecord] = []
    for path in sorted(Path(directory).glob("*.json")):
        records.extend(load_skeleton_file(path))
    return records


def make_instance(inst_id: int, points: Iterable, occlusion="All") -> LabeledInstance:
    """Convenience constructor accepting plain ``(x, y)`` pairs."""
    return LabeledInstance(inst_id, Occlusion(occlusion), tuple(Point2D(*p) for p in points))
