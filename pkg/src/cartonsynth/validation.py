"""Check the three labeling rules on a clicked instance.

R1
    The first click is a two-line point (clicked once).
R2
    Every surface loop runs clockwise on screen.
R3
    Every line is clicked at most once per direction, so a common line
    shows up exactly twice (once each way) and an outline edge once.

Violations are returned as data; callers decide whether they are fatal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .annotations import LabeledInstance
from .segmentation import (
    DEFAULT_PSI,
    build_cost_matrix,
    cluster_faceted_points,
    find_surface_loops,
    signed_area,
)


class PointClass(str, enum.Enum):
    TWO_LINE = "TwoLine"
    THREE_LINE = "ThreeLine"


@dataclass(frozen=True)
class ValidationReport:
    instance_id: int
    violations: tuple[tuple[str, str], ...] = ()
    point_classes: dict[int, PointClass] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_instance(inst: LabeledInstance, psi: float = DEFAULT_PSI) -> ValidationReport:
    clusters = cluster_faceted_points(inst.points, psi)
    classes = {
        k: PointClass.TWO_LINE if clusters.is_two_line(k) else PointClass.THREE_LINE
        for k in range(clusters.size)
    }
    violations: list[tuple[str, str]] = []

    start = clusters.labels[0]
    if classes[start] is not PointClass.TWO_LINE:
        violations.append(
            ("R1", f"start point belongs to faceted cluster {start} clicked "
                   f"{len(clusters.groups[start])} times")
        )

    labels = clusters.labels
    n = len(labels)
    directed: dict[tuple[int, int], int] = {}
    for t in range(n):
        a, b = labels[t], labels[(t + 1) % n]
        if a == b:
            violations.append(("R3", f"clicks {t} and {(t + 1) % n} collapse to one point"))
            continue
        directed[(a, b)] = directed.get((a, b), 0) + 1
    for (a, b), count in sorted(directed.items()):
        if count > 1:
            violations.append(("R3", f"line {a}->{b} clicked {count} times in the same direction"))

    v = build_cost_matrix(clusters)
    for loop in find_surface_loops(clusters, v):
        area = signed_area(clusters.unique_points[list(loop)])
        if area < 0:
            violations.append(("R2", f"surface {loop} is counter-clockwise (area {area:.1f})"))

    return ValidationReport(inst.id, tuple(violations), classes)
