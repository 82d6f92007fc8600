"""Complete occluded surface contours to parallelograms.

An incomplete contour is completed by picking two adjacent edges as sides
of a parallelogram, provided both edges are *constructed lines* (every
other contour point lies strictly on one side of the edge or on it). The
two remaining sides are drawn parallel to those edges through the contour
points farthest from them. Among all admissible edge pairs the smallest
parallelogram wins. A 4-point contour is kept as-is when its area is
close enough to the best parallelogram's (ratio above ``gamma``).

Slopes are carried as unit direction vectors so vertical edges need no
special case.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .annotations import Occlusion
from .errors import DegenerateCornerError, DegenerateEdgeError, ReconstructionError
from .segmentation import PointClusters, SurfaceSet, loop_edges, signed_area

DEFAULT_GAMMA = 2.0 / 3.0
ON_LINE_TOL = 1e-6


@dataclass(frozen=True)
class LineCoeffs:
    """Line ``a*x + b*y + c = 0`` with ``a**2 + b**2 == 1``."""

    a: float
    b: float
    c: float

    def evaluate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return self.a * p[:, 0] + self.b * p[:, 1] + self.c

    @property
    def direction(self) -> np.ndarray:
        return np.array([-self.b, self.a])

    def parallel_through(self, point) -> LineCoeffs:
        x, y = point
        return LineCoeffs(self.a, self.b, -(self.a * x + self.b * y))


def line_through(p, q) -> LineCoeffs:
    (px, py), (qx, qy) = p, q
    a, b = qy - py, px - qx
    norm = np.hypot(a, b)
    if norm == 0:
        raise DegenerateEdgeError(f"cannot draw a line through coincident points {tuple(p)}")
    a, b = a / norm, b / norm
    return LineCoeffs(float(a), float(b), float(-(a * px + b * py)))


def intersect(l1: LineCoeffs, l2: LineCoeffs) -> np.ndarray:
    det = l1.a * l2.b - l2.a * l1.b
    if abs(det) < 1e-12:
        raise DegenerateCornerError("lines are parallel; corner lies at infinity")
    x = (l1.b * l2.c - l2.b * l1.c) / det
    y = (l2.a * l1.c - l1.a * l2.c) / det
    return np.array([x, y])


@dataclass(frozen=True)
class ConvexitySignature:
    beta: int
    m: int
    n: int


def convexity_signature(line: LineCoeffs, contour) -> ConvexitySignature:
    values = line.evaluate(contour)
    signs = np.where(np.abs(values) <= ON_LINE_TOL, 0, np.sign(values)).astype(int)
    return ConvexitySignature(int(signs.sum()), int((signs == 0).sum()), len(values))


def is_constructed_line(line: LineCoeffs, contour) -> bool:
    sig = convexity_signature(line, contour)
    return abs(sig.beta) == sig.n - sig.m


@dataclass(frozen=True)
class Parallelogram:
    vertices: np.ndarray
    area: float
    slopes: tuple[np.ndarray, np.ndarray]


def build_parallelogram(contour, edge_index: int) -> Parallelogram | None:
    """Parallelogram anchored on edges ``(i, i+1)`` and ``(i+1, i+2)``.

    Returns ``None`` when either edge is not a constructed line or the
    result has no area.

    Raises:
        DegenerateCornerError: the two anchor edges are parallel.
    """
    pts = np.asarray(contour, dtype=float)
    n = len(pts)
    i = edge_index % n
    p0, p1, p2 = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
    line1 = line_through(p0, p1)
    line2 = line_through(p1, p2)
    if not (is_constructed_line(line1, pts) and is_constructed_line(line2, pts)):
        return None
    # first index wins on ties (argmax semantics)
    far1 = pts[int(np.argmax(np.abs(line1.evaluate(pts))))]
    far2 = pts[int(np.argmax(np.abs(line2.evaluate(pts))))]
    line3 = line1.parallel_through(far1)
    line4 = line2.parallel_through(far2)
    corners = np.array([
        intersect(line1, line2),
        intersect(line3, line2),
        intersect(line3, line4),
        intersect(line1, line4),
    ])
    # the shared corner is the contour vertex itself, not a recomputed one
    corners[0] = p1
    area = abs(signed_area(corners))
    if not area > 0:
        return None
    return Parallelogram(corners, area, (line1.direction, line2.direction))


class Source(str, enum.Enum):
    ORIGINAL = "Original"
    PARALLELOGRAM = "Parallelogram"


@dataclass(frozen=True)
class ReconstructedSurface:
    surface_index: int
    contour: np.ndarray
    source: Source


def _best_parallelogram(pts: np.ndarray, edge_indices) -> Parallelogram | None:
    best = None
    for i in edge_indices:
        try:
            cand = build_parallelogram(pts, i)
        except DegenerateCornerError:
            continue
        if cand is not None and (best is None or cand.area < best.area):
            best = cand
    return best


def _final_contour(pts, best, gamma, surface_index, instance_id) -> ReconstructedSurface:
    if best is None:
        raise ReconstructionError("no edge pair yields a parallelogram", instance_id, surface_index)
    if len(pts) == 4 and gamma < abs(signed_area(pts)) / best.area:
        return ReconstructedSurface(surface_index, pts.copy(), Source.ORIGINAL)
    return ReconstructedSurface(surface_index, best.vertices, Source.PARALLELOGRAM)


def reconstruct_single(
    contour,
    occlusion: Occlusion | str,
    gamma: float = DEFAULT_GAMMA,
    *,
    surface_index: int = 0,
    instance_id: int | None = None,
) -> ReconstructedSurface:
    """Final contour of a lone visible surface.

    Unoccluded contours pass through untouched, whatever their length.
    Occluded ones are completed to the smallest admissible parallelogram,
    except that a 4-point contour survives when
    ``gamma < area(contour) / area(best)``.
    """
    pts = np.asarray(contour, dtype=float)
    if Occlusion(occlusion) is Occlusion.ALL:
        return ReconstructedSurface(surface_index, pts.copy(), Source.ORIGINAL)
    best = _best_parallelogram(pts, range(len(pts)))
    return _final_contour(pts, best, gamma, surface_index, instance_id)


def _common_edge_candidates(loop: Sequence[int], common: set[tuple[int, int]]) -> list[int]:
    edges = loop_edges(loop)
    is_common = [tuple(sorted(e)) in common for e in edges]
    n = len(edges)
    return [i for i in range(n) if is_common[i] or is_common[(i + 1) % n]]


def _edge_on_line(quad: np.ndarray, a: np.ndarray, b: np.ndarray) -> int | None:
    line = line_through(a, b)
    scale = max(1.0, float(np.abs(quad).max()))
    d = np.abs(line.evaluate(quad))
    best, best_err = None, np.inf
    for j in range(4):
        err = d[j] + d[(j + 1) % 4]
        if err < best_err:
            best, best_err = j, err
    if best_err > 2 * ON_LINE_TOL * scale:
        return None
    return best


def _rebuild(quad: np.ndarray, snapped: dict[int, np.ndarray]) -> np.ndarray:
    """Move snapped vertices and re-close the parallelogram around them."""
    q = quad.copy()
    idx = sorted(snapped)
    for j in idx:
        q[j] = snapped[j]
    s = set(idx)
    j = next((j for j in s if (j + 1) % 4 in s), None)
    if len(s) == 2 and j is not None:
        side = quad[(j - 1) % 4] - quad[j]
        q[(j - 1) % 4] = q[j] + side
        q[(j + 2) % 4] = q[(j + 1) % 4] + side
    elif len(s) == 3:
        free = next(j for j in range(4) if j not in s)
        q[free] = q[(free - 1) % 4] + q[(free + 1) % 4] - q[(free + 2) % 4]
    return q


def reconstruct_multi(
    surfaces: SurfaceSet,
    coords: PointClusters,
    occlusion: Occlusion | str,
    gamma: float = DEFAULT_GAMMA,
) -> list[ReconstructedSurface]:
    """Complete 2 or 3 adjacent surfaces so they agree on their common lines.

    Only edge pairs with at least one common line are tried as
    parallelogram anchors, so with two common lines a loop tries each of
    them with both neighbours; the smallest result wins and 4-point loops
    go through the area-ratio gate. The occlusion tag is not consulted
    because it describes the whole carton, not one face. Afterwards every
    common-line endpoint is moved to the mean of the surfaces' copies of
    it, and each parallelogram is re-closed so its opposite sides stay
    parallel. Contours kept as ``Original`` pin the endpoints they touch.
    """
    vertices = coords.unique_points
    common = set(surfaces.common_lines)
    out: list[ReconstructedSurface] = []
    for k, loop in enumerate(surfaces.loops):
        pts = vertices[list(loop)]
        candidates = _common_edge_candidates(loop, common)
        best = _best_parallelogram(pts, candidates)
        if best is None:
            raise ReconstructionError(
                "common line is not a usable constructed line", surfaces.instance_id, k
            )
        out.append(_final_contour(pts, best, gamma, k, surfaces.instance_id))

    # vertex id -> list of (surface, quad corner)
    members: dict[int, list[tuple[int, int]]] = {}
    for u, v in surfaces.common_lines:
        a, b = vertices[u], vertices[v]
        for k, loop in enumerate(surfaces.loops):
            if not ({(u, v), (v, u)} & set(loop_edges(loop))):
                continue
            quad = out[k].contour
            j = _edge_on_line(quad, a, b)
            if j is None:
                raise ReconstructionError(
                    f"no side lies on common line {u}-{v}", surfaces.instance_id, k
                )
            j2 = (j + 1) % 4
            if np.linalg.norm(quad[j] - a) + np.linalg.norm(quad[j2] - b) <= (
                np.linalg.norm(quad[j] - b) + np.linalg.norm(quad[j2] - a)
            ):
                pairs = ((u, j), (v, j2))
            else:
                pairs = ((u, j2), (v, j))
            for vid, corner in pairs:
                entry = members.setdefault(vid, [])
                if (k, corner) not in entry:
                    entry.append((k, corner))

    snapped: dict[int, dict[int, np.ndarray]] = {}
    for vid, entries in members.items():
        pinned = [out[k].contour[c] for k, c in entries if out[k].source is Source.ORIGINAL]
        if pinned:
            target = pinned[0]
        else:
            target = np.mean([out[k].contour[c] for k, c in entries], axis=0)
        for k, c in entries:
            snapped.setdefault(k, {})[c] = target

    final = []
    for rec in out:
        if rec.source is Source.ORIGINAL or rec.surface_index not in snapped:
            final.append(rec)
            continue
        quad = _rebuild(rec.contour, snapped[rec.surface_index])
        final.append(ReconstructedSurface(rec.surface_index, quad, rec.source))
    return final


def reconstruct_surfaces(
    surfaces: SurfaceSet,
    coords: PointClusters,
    occlusion: Occlusion | str,
    gamma: float = DEFAULT_GAMMA,
) -> list[ReconstructedSurface]:
    """Dispatch to the single- or multi-surface strategy."""
    if len(surfaces.loops) == 1:
        return [
            reconstruct_single(
                surfaces.loop_points(0), occlusion, gamma, instance_id=surfaces.instance_id
            )
        ]
    return reconstruct_multi(surfaces, coords, occlusion, gamma)
