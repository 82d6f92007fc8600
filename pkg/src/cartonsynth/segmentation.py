"""Split one instance's clicked sequence into its visible surfaces.

The pipeline has three steps:

1. clicks closer than ``psi`` pixels are merged into one faceted point
   (transitive closure, coordinates replaced by the group mean);
2. consecutive clicks, including the wrap-around from last to first, become
   unit-cost directed edges between merged points;
3. each point clicked only once (a two-line point) seeds a search for the
   shortest simple directed cycle through it. Distinct cycles are the
   surfaces.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .annotations import LabeledInstance
from .errors import CoverageError, SurfaceCountError

DEFAULT_PSI = 25.0
MAX_DEGREE = 3


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PointClusters:
    """Faceted-point grouping of a clicked sequence.

    Attributes:
        merged_sequence: ``(n, 2)`` click coordinates replaced by their group mean.
        unique_points: ``(K, 2)`` one coordinate per group, first-occurrence order.
        groups: for each group, the click indices belonging to it.
        labels: ``(n,)`` group index of every click.
    """

    merged_sequence: np.ndarray
    unique_points: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    labels: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.groups)

    def is_two_line(self, cluster: int) -> bool:
        return len(self.groups[cluster]) == 1


def cluster_faceted_points(points: Sequence, psi: float = DEFAULT_PSI) -> PointClusters:
    """Merge clicks whose chained pairwise distances stay within ``psi``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    adjacency = squareform(pdist(pts)) <= psi
    _, raw = connected_components(csr_matrix(adjacency), directed=False)
    # relabel components in order of first click
    remap: dict[int, int] = {}
    for r in raw:
        remap.setdefault(int(r), len(remap))
    labels = tuple(remap[int(r)] for r in raw)
    groups = [[] for _ in remap]
    for i, lab in enumerate(labels):
        groups[lab].append(i)
    unique = np.array([pts[g].mean(axis=0) for g in groups])
    merged = unique[list(labels)] if n else np.empty((0, 2))
    return PointClusters(
        merged_sequence=_frozen(merged),
        unique_points=_frozen(unique),
        groups=tuple(tuple(g) for g in groups),
        labels=labels,
    )


@dataclass(frozen=True)
class CostMatrix:
    """Directed unit-cost adjacency over merged points; ``inf`` means no edge."""

    entries: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def successors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(np.isfinite(self.entries[i]))]

    def edges(self) -> set[tuple[int, int]]:
        rows, cols = np.nonzero(np.isfinite(self.entries))
        return {(int(i), int(j)) for i, j in zip(rows, cols)}

    def out_degree(self) -> np.ndarray:
        return np.isfinite(self.entries).sum(axis=1)

    def in_degree(self) -> np.ndarray:
        return np.isfinite(self.entries).sum(axis=0)


def build_cost_matrix(clusters: PointClusters) -> CostMatrix:
    k = clusters.size
    v = np.full((k, k), np.inf)
    labels = clusters.labels
    n = len(labels)
    for t in range(n):
        i, j = labels[t], labels[(t + 1) % n]
        if i != j:
            v[i, j] = 1.0
    v.flags.writeable = False
    return CostMatrix(v)


def find_min_cycle(v: CostMatrix, start: int) -> tuple[int, ...] | None:
    """Shortest simple directed cycle through ``start``, or ``None``.

    All edges cost 1, so a breadth-first search over simple paths finds the
    minimum. Successors are expanded in ascending order, which makes the
    first cycle found at the minimal length the lexicographically smallest
    one among equals.
    """
    succ = [v.successors(i) for i in range(v.size)]
    queue = deque([(start,)])
    while queue:
        path = queue.popleft()
        for nxt in succ[path[-1]]:
            if nxt == start:
                return path
            if nxt not in path:
                queue.append(path + (nxt,))
    return None


def canonical_loop(loop: Sequence[int]) -> tuple[int, ...]:
    """Rotate so the smallest vertex comes first; direction is kept."""
    k = min(range(len(loop)), key=lambda i: loop[i])
    return tuple(loop[k:]) + tuple(loop[:k])


def loop_edges(loop: Sequence[int]) -> list[tuple[int, int]]:
    return [(loop[i], loop[(i + 1) % len(loop)]) for i in range(len(loop))]


def _undirected(edge) -> tuple[int, int]:
    a, b = edge
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class SurfaceSet:
    """Visible surfaces of one instance.

    ``loops`` hold indices into ``vertices`` (the merged points), in the
    order the loops were discovered. ``common_lines`` are sorted vertex
    pairs shared by two loops.
    """

    instance_id: int
    loops: tuple[tuple[int, ...], ...]
    common_lines: tuple[tuple[int, int], ...]
    vertices: np.ndarray

    def loop_points(self, k: int) -> np.ndarray:
        return self.vertices[list(self.loops[k])]


def find_surface_loops(clusters: PointClusters, v: CostMatrix) -> list[tuple[int, ...]]:
    """Deduplicated minimal cycles seeded from every two-line point."""
    loops: list[tuple[int, ...]] = []
    for k in range(clusters.size):
        if not clusters.is_two_line(k):
            continue
        cyc = find_min_cycle(v, k)
        if cyc is None:
            continue
        cyc = canonical_loop(cyc)
        if cyc not in loops:
            loops.append(cyc)
    return loops


def common_lines_of(loops: Sequence[Sequence[int]]) -> tuple[tuple[int, int], ...]:
    counts: dict[tuple[int, int], int] = {}
    for loop in loops:
        for e in {_undirected(e) for e in loop_edges(loop)}:
            counts[e] = counts.get(e, 0) + 1
    return tuple(sorted(e for e, c in counts.items() if c == 2))


def segment_instance(
    inst: LabeledInstance, psi: float = DEFAULT_PSI
) -> tuple[PointClusters, SurfaceSet]:
    """Cluster, build the cost matrix and extract surfaces in one go.

    Raises:
        CoverageError: a merged point has more than three in- or
            out-edges, or the loops do not exactly partition the edges.
            A loop with fewer than three corners (an out-and-back line)
            is also rejected here.
        SurfaceCountError: zero or more than three loops were found.
    """
    clusters = cluster_faceted_points(inst.points, psi)
    v = build_cost_matrix(clusters)
    if v.out_degree().max(initial=0) > MAX_DEGREE or v.in_degree().max(initial=0) > MAX_DEGREE:
        raise CoverageError(
            f"instance {inst.id}: a merged point is connected more than {MAX_DEGREE} times"
        )
    loops = find_surface_loops(clusters, v)
    if not 1 <= len(loops) <= 3:
        raise SurfaceCountError(f"instance {inst.id}: found {len(loops)} surfaces, expected 1-3")
    seen: set[tuple[int, int]] = set()
    for loop in loops:
        for e in loop_edges(loop):
            if e in seen:
                raise CoverageError(f"instance {inst.id}: directed edge {e} used by two surfaces")
            seen.add(e)
    missing = v.edges() - seen
    if missing:
        raise CoverageError(
            f"instance {inst.id}: clicked edges {sorted(missing)} belong to no surface"
        )
    short = [loop for loop in loops if len(loop) < 3]
    if short:
        raise CoverageError(f"instance {inst.id}: surface {short[0]} has fewer than 3 corners")
    common = common_lines_of(loops)
    surfaces = SurfaceSet(inst.id, tuple(loops), common, clusters.unique_points)
    return clusters, surfaces


def extract_surfaces(inst: LabeledInstance, psi: float = DEFAULT_PSI) -> SurfaceSet:
    return segment_instance(inst, psi)[1]


def signed_area(points) -> float:
    """Shoelace area; positive for clockwise loops in y-down image coordinates."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

