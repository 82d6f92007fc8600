import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.spatial import ConvexHull

from cartonsynth.annotations import make_instance
from cartonsynth.errors import DegenerateCornerError, DegenerateEdgeError, ReconstructionError
from cartonsynth.reconstruction import (
    Source,
    build_parallelogram,
    convexity_signature,
    intersect,
    is_constructed_line,
    line_through,
    reconstruct_single,
    reconstruct_surfaces,
)
from cartonsynth.segmentation import segment_instance, signed_area
from cartonsynth.synthetic import (
    cut_corner,
    example_carton,
    instance_from_loops,
    random_box,
    random_parallelogram,
)

from conftest import carton_labels, oracle_parallelogram_areas, same_polygon

SQUARE = np.array([[0, 0], [100, 0], [100, 100], [0, 100]], float)
L_HEXAGON = np.array([[0, 0], [20, 0], [20, 10], [10, 10], [10, 20], [0, 20]], float)


def test_line_is_unit_normalized_and_passes_through_points():
    line = line_through((1, 2), (4, 6))
    assert np.hypot(line.a, line.b) == pytest.approx(1)
    np.testing.assert_allclose(line.evaluate([(1, 2), (4, 6)]), 0, atol=1e-12)
    vertical = line_through((3, 0), (3, 10))
    np.testing.assert_allclose(vertical.evaluate([(3, 50)]), 0)


def test_coincident_points_have_no_line():
    with pytest.raises(DegenerateEdgeError):
        line_through((1, 1), (1, 1))


def test_parallel_lines_have_no_corner():
    with pytest.raises(DegenerateCornerError):
        intersect(line_through((0, 0), (1, 0)), line_through((0, 5), (7, 5)))


def test_intersection_of_axes():
    np.testing.assert_allclose(
        intersect(line_through((0, 3), (10, 3)), line_through((2, 0), (2, 10))), [2, 3]
    )


def test_square_edges_are_constructed_lines():
    for i in range(4):
        line = line_through(SQUARE[i], SQUARE[(i + 1) % 4])
        sig = convexity_signature(line, SQUARE)
        assert sig.m == 2 and sig.n == 4 and abs(sig.beta) == 2
        assert is_constructed_line(line, SQUARE)


def test_l_hexagon_reflex_edge_is_not_constructed():
    line = line_through(L_HEXAGON[2], L_HEXAGON[3])
    sig = convexity_signature(line, L_HEXAGON)
    assert sig.m == 2 and abs(sig.beta) < sig.n - sig.m
    assert not is_constructed_line(line, L_HEXAGON)
    assert is_constructed_line(line_through(L_HEXAGON[0], L_HEXAGON[1]), L_HEXAGON)


def test_l_hexagon_completes_to_bounding_square():
    rec = reconstruct_single(L_HEXAGON, "Occlusion")
    assert rec.source is Source.PARALLELOGRAM
    assert same_polygon(rec.contour, [[0, 0], [20, 0], [20, 20], [0, 20]], 1e-9)


def test_build_from_square_corner_reproduces_square():
    for i in range(4):
        par = build_parallelogram(SQUARE, i)
        assert par.area == pytest.approx(1e4)
        np.testing.assert_allclose(par.vertices[0], SQUARE[(i + 1) % 4])
        assert same_polygon(par.vertices, SQUARE, 1e-9)


def test_unoccluded_quad_passes_through():
    quad = np.array([[0, 0], [10, 1], [9, 12], [-1, 8]], float)
    rec = reconstruct_single(quad, "All")
    assert rec.source is Source.ORIGINAL
    np.testing.assert_array_equal(rec.contour, quad)


def test_occluded_rectangle_is_kept():
    rec = reconstruct_single(SQUARE, "Occlusion")
    assert rec.source is Source.ORIGINAL


def test_cut_square_is_completed():
    pentagon = cut_corner(SQUARE, 2, 0.3, 0.4)
    rec = reconstruct_single(pentagon, "Occlusion")
    assert rec.source is Source.PARALLELOGRAM
    assert same_polygon(rec.contour, SQUARE, 1e-9)


def test_unoccluded_contour_is_never_changed():
    pentagon = cut_corner(SQUARE, 0, 0.5, 0.5)
    rec = reconstruct_single(pentagon, "All")
    assert rec.source is Source.ORIGINAL
    np.testing.assert_array_equal(rec.contour, pentagon)


def test_normalized_line_through_3_4():
    line = line_through((0, 0), (3, 4))
    coeffs = np.array([line.a, line.b, line.c])
    assert np.allclose(coeffs, [-0.8, 0.6, 0]) or np.allclose(coeffs, [0.8, -0.6, 0])


def test_line_through_all_points_has_zero_signature():
    sig = convexity_signature(line_through((0, 0), (1, 1)), [(0, 0), (1, 1), (2, 2), (5, 5)])
    assert (sig.beta, sig.m, sig.n) == (0, 4, 4)


def test_cut_rectangle_from_bottom_edge():
    pentagon = np.array([[0, 0], [10, 0], [10, 6], [8, 8], [0, 8]], float)
    par = build_parallelogram(pentagon, 0)
    assert same_polygon(par.vertices, [[0, 0], [10, 0], [10, 8], [0, 8]], 1e-12)
    assert par.area == pytest.approx(80)


def test_reflex_anchor_yields_nothing():
    # edge (20,10)-(10,10) and its successor meet at the reflex corner
    assert build_parallelogram(L_HEXAGON, 1) is None
    assert build_parallelogram(L_HEXAGON, 2) is None


def test_mild_trapezoid_is_kept():
    quad = np.array([[0, 0], [10, 0], [9, 8], [1, 8]], float)
    assert signed_area(quad) == 72
    rec = reconstruct_single(quad, "Occlusion")
    assert rec.source is Source.ORIGINAL


def trapezoid(w):
    # the smallest anchored parallelogram has area 80 for any top width w < 10
    return np.array([[0, 0], [10, 0], [5 + w / 2, 8], [5 - w / 2, 8]], float)


@pytest.mark.parametrize("w,expected", [(8.0, Source.ORIGINAL), (4.0, Source.ORIGINAL), (2.0, Source.PARALLELOGRAM), (0.2, Source.PARALLELOGRAM)])
def test_area_ratio_gate(w, expected):
    quad = trapezoid(w)
    ratio = signed_area(quad) / 80.0
    assert ratio == pytest.approx((10 + w) / 20)
    rec = reconstruct_single(quad, "Occlusion")
    assert rec.source is expected
    assert (2 / 3 < ratio) == (expected is Source.ORIGINAL)


def test_trapezoid_best_parallelogram_area():
    areas = [a for a in oracle_parallelogram_areas(trapezoid(2.0)) if a is not None]
    assert min(areas) == pytest.approx(80.0)
    rec = reconstruct_single(trapezoid(2.0), "Occlusion")
    assert abs(signed_area(rec.contour)) == pytest.approx(80.0)


def test_no_admissible_pair_raises():
    # every vertex of this star-ish hexagon has a reflex neighbor
    star = np.array([[0, 0], [10, 5], [20, 0], [15, 10], [20, 20], [10, 15], [0, 20], [5, 10]], float)
    with pytest.raises(ReconstructionError):
        reconstruct_single(star, "Occlusion")


def convex_polygons(min_points=4, max_points=9):
    pts = st.lists(
        st.tuples(st.integers(0, 400), st.integers(0, 400)),
        min_size=min_points,
        max_size=30,
        unique=True,
    )

    def hull(raw):
        p = np.array(raw, float)
        try:
            h = ConvexHull(p)
        except Exception:
            return None
        poly = p[h.vertices]
        return poly if min_points <= len(poly) <= max_points else None

    return pts.map(hull).filter(lambda p: p is not None)


@given(convex_polygons(5))
@settings(max_examples=150, deadline=None)
def test_result_is_minimal_and_encloses_contour(poly):
    assume(signed_area(poly) > 100)
    areas = [a for a in oracle_parallelogram_areas(poly) if a is not None]
    rec = reconstruct_single(poly, "Occlusion")
    quad = rec.contour
    assert rec.source is Source.PARALLELOGRAM
    assert abs(signed_area(quad)) == pytest.approx(min(areas), rel=1e-9)
    assert signed_area(quad) > 0
    # every contour point lies inside the quad (all edge cross products >= 0)
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        cross = (b[0] - a[0]) * (poly[:, 1] - a[1]) - (b[1] - a[1]) * (poly[:, 0] - a[0])
        assert np.all(cross >= -1e-6 * np.abs(quad).max() ** 2)
    # opposite sides parallel
    np.testing.assert_allclose(quad[1] - quad[0], quad[2] - quad[3], atol=1e-6 * np.abs(quad).max())


@given(convex_polygons(4, 4), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
@settings(max_examples=100, deadline=None)
def test_gate_is_monotone_in_gamma(quad, g1, g2):
    assume(signed_area(quad) > 100)
    lo, hi = sorted((g1, g2))
    if reconstruct_single(quad, "Occlusion", hi).source is Source.ORIGINAL:
        assert reconstruct_single(quad, "Occlusion", lo).source is Source.ORIGINAL


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_cut_parallelogram_is_recovered(seed):
    rng = np.random.default_rng(seed)
    par = random_parallelogram(rng)
    k = int(rng.integers(4))
    pentagon = cut_corner(par, k, rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95))
    rec = reconstruct_single(pentagon, "Occlusion")
    assert same_polygon(rec.contour, par, 1e-6)


# -- multi-surface --------------------------------------------------------


def shared_sides_agree(surfaces, recon, tol):
    """Both faces of every common line carry the same pair of corners."""
    for u, v in surfaces.common_lines:
        ends = []
        for k, loop in enumerate(surfaces.loops):
            if u in loop and v in loop:
                q = recon[k].contour
                ends.append([q[np.linalg.norm(q - surfaces.vertices[w], axis=1).argmin()] for w in (u, v)])
        if len(ends) != 2 or not np.allclose(ends[0], ends[1], atol=tol):
            return False
    return True


def test_example_carton_unoccluded_keeps_quads_and_completes_pentagons():
    inst = example_carton(occlusion="All")
    clusters, surfaces = segment_instance(inst)
    recon = reconstruct_surfaces(surfaces, clusters, inst.occlusion)
    labels = carton_labels(clusters)
    for rec, loop in zip(recon, surfaces.loops):
        assert len(rec.contour) == 4 and signed_area(rec.contour) > 0
        names = [labels[v] for v in loop]
        if len(loop) == 4:
            assert rec.source is Source.ORIGINAL
            assert sorted(names) == [2, 3, 4, 5]
        else:
            assert rec.source is Source.PARALLELOGRAM
    assert shared_sides_agree(surfaces, recon, 1e-6)


def test_two_rectangles_share_an_identical_edge():
    pts = {1: (0, 0), 2: (100, 0), 3: (100, 100), 4: (0, 100), 5: (200, 0), 6: (200, 100)}
    clicks = (1, 2, 5, 6, 3, 2, 3, 4)
    inst = make_instance(0, [pts[k] for k in clicks], occlusion="Occlusion")
    clusters, surfaces = segment_instance(inst)
    recon = reconstruct_surfaces(surfaces, clusters, inst.occlusion)
    assert all(r.source is Source.ORIGINAL for r in recon)
    (u, v), = surfaces.common_lines
    for r in recon:
        corners = {tuple(p) for p in r.contour}
        assert {tuple(surfaces.vertices[u]), tuple(surfaces.vertices[v])} <= corners


def test_example_carton_occluded_pins_to_kept_face():
    inst = example_carton(occlusion="Occlusion")
    clusters, surfaces = segment_instance(inst)
    recon = reconstruct_surfaces(surfaces, clusters, inst.occlusion)
    kept = [r for r in recon if r.source is Source.ORIGINAL]
    assert len(kept) == 1
    corner5 = next(k for k, lab in carton_labels(clusters).items() if lab == 5)
    center = surfaces.vertices[corner5]
    for rec in recon:
        assert np.min(np.linalg.norm(rec.contour - center, axis=1)) < 1e-9
    assert shared_sides_agree(surfaces, recon, 1e-6)


def cut_outer_corner(verts, loops, rng):
    """Replace one vertex that belongs to a single face by two cut points."""
    counts = {}
    for loop in loops:
        for v in loop:
            counts[v] = counts.get(v, 0) + 1
    choices = [(k, j) for k, loop in enumerate(loops) for j, v in enumerate(loop) if counts[v] == 1]
    k, j = choices[int(rng.integers(len(choices)))]
    loop = list(loops[k])
    cut = cut_corner(verts[loop], j, rng.uniform(0.15, 0.6), rng.uniform(0.15, 0.6))
    new_ids = [len(verts), len(verts) + 1]
    verts = np.vstack([verts, cut[j], cut[j + 1]])
    loops = list(loops)
    loops[k] = tuple(loop[:j] + new_ids + loop[j + 1 :])
    return verts, loops


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
@settings(max_examples=80, deadline=None)
def test_multi_surface_cut_corner_is_recovered(seed, n_faces):
    rng = np.random.default_rng(seed)
    verts, loops = random_box(rng, n_faces, (400, 400), 150, min_sep=40)
    truth = [verts[list(loop)] for loop in loops]
    cut_verts, cut_loops = cut_outer_corner(verts, loops, rng)
    assume(min(
        np.linalg.norm(cut_verts[a] - cut_verts[b])
        for a in range(len(cut_verts)) for b in range(a)
    ) > 30)
    inst = instance_from_loops(0, cut_verts, cut_loops, occlusion="Occlusion")
    clusters, surfaces = segment_instance(inst)
    recon = reconstruct_surfaces(surfaces, clusters, inst.occlusion)
    for want in truth:
        assert any(same_polygon(r.contour, want, 1e-6) for r in recon)
