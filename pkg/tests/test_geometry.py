import json
import warnings

import numpy as np
import pytest
from scipy import spatial

from voronoigram import (DegenerateInput, cell_area, cell_areas, delaunay,
                         facet_length, voronoi, voronoi_facets)
from voronoigram.geometry import diagram_to_json, diagram_to_svg, polygon_area

from helpers import point_in_convex_polygon

TWO_POINTS = np.array([[0.25, 0.5], [0.75, 0.5]])
QUADRANT = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])


def random_cloud(n, seed):
    return np.random.default_rng(seed).random((n, 2))


# ---------------------------------------------------------------------------
# Delaunay
# ---------------------------------------------------------------------------

def test_delaunay_triangle():
    tri = delaunay([[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]])
    assert tri.triangles.shape == (1, 3)
    assert list(tri.triangles[0]) == [0, 1, 2]  # already CCW
    assert np.all(tri.adjacency == -1)


def test_delaunay_ccw_orientation():
    pts = random_cloud(60, 3)
    tri = delaunay(pts)
    a, b, c = (pts[tri.triangles[:, k]] for k in range(3))
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    assert np.all(cross > 0)


def test_delaunay_rejects_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        delaunay([[0.2, 0.2], [0.8, 0.8]])
    with pytest.raises(DegenerateInput):
        delaunay([[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]])  # collinear
    with pytest.raises(DegenerateInput):
        delaunay([[0.1, 0.1], [1.2, 0.4], [0.5, 0.9]])  # outside the square


def test_delaunay_empty_circumcircle():
    pts = random_cloud(40, 11)
    tri = delaunay(pts)
    for i, j, k in tri.triangles:
        a, b, c = pts[i], pts[j], pts[k]
        # Circumcenter from the perpendicular-bisector linear system.
        m = 2.0 * np.array([b - a, c - a])
        rhs = np.array([b @ b - a @ a, c @ c - a @ a])
        center = np.linalg.solve(m, rhs)
        radius = np.linalg.norm(a - center)
        dists = np.linalg.norm(pts - center, axis=1)
        others = np.setdiff1d(np.arange(len(pts)), [i, j, k])
        assert np.all(dists[others] >= radius - 1e-9)


def test_delaunay_tiles_convex_hull():
    pts = random_cloud(80, 5)
    tri = delaunay(pts)
    tri_area = sum(polygon_area(pts[t]) for t in tri.triangles)
    hull = spatial.ConvexHull(pts)
    assert tri_area == pytest.approx(hull.volume, abs=1e-12)


def test_delaunay_deterministic():
    pts = random_cloud(200, 17)
    t1, t2 = delaunay(pts), delaunay(pts)
    assert np.array_equal(t1.triangles, t2.triangles)
    assert np.array_equal(t1.adjacency, t2.adjacency)


# ---------------------------------------------------------------------------
# Voronoi diagram
# ---------------------------------------------------------------------------

def test_two_point_diagram():
    d = voronoi(TWO_POINTS)
    assert cell_area(d, 0) == pytest.approx(0.5, abs=1e-12)
    assert cell_area(d, 1) == pytest.approx(0.5, abs=1e-12)
    assert facet_length(d, 0, 1) == pytest.approx(1.0, abs=1e-12)
    assert facet_length(d, 1, 0) == pytest.approx(1.0, abs=1e-12)


def test_quadrant_diagram():
    d = voronoi(QUADRANT)
    for i in range(4):
        assert cell_area(d, i) == pytest.approx(0.25, abs=1e-12)
    # Axis-aligned neighbors share a facet of length 1/2; diagonal pairs meet
    # only at the center point.
    assert facet_length(d, 0, 1) == pytest.approx(0.5, abs=1e-12)
    assert facet_length(d, 0, 2) == pytest.approx(0.5, abs=1e-12)
    assert facet_length(d, 1, 3) == pytest.approx(0.5, abs=1e-12)
    assert facet_length(d, 2, 3) == pytest.approx(0.5, abs=1e-12)
    assert facet_length(d, 0, 3) == 0.0
    assert facet_length(d, 1, 2) == 0.0


def test_voronoi_rejects_single_point():
    with pytest.raises(DegenerateInput):
        voronoi([[0.5, 0.5]])


def test_facet_length_symmetry_random_cloud():
    d = voronoi(random_cloud(50, 23))
    for i, j in d.facet_pairs:
        assert facet_length(d, int(i), int(j)) == facet_length(d, int(j), int(i))
    with pytest.raises(ValueError):
        facet_length(d, 3, 3)


def test_areas_sum_to_one():
    for n, seed in ((50, 1), (500, 2), (4000, 3)):
        d = voronoi(random_cloud(n, seed))
        assert abs(cell_areas(d).sum() - 1.0) <= 1e-9


def test_max_cell_area_soft_bound():
    pts = random_cloud(500, 9)
    biggest = cell_areas(voronoi(pts)).max()
    bound = 40.0 * np.log(500) / 500
    if biggest > bound:
        warnings.warn(f"max cell area {biggest:.4g} exceeds soft bound {bound:.4g}")


def test_cells_are_convex_and_contain_their_site():
    d = voronoi(random_cloud(120, 31))
    for i, poly in enumerate(d.cells):
        a = poly
        b = np.roll(a, -1, axis=0)
        c = np.roll(a, -2, axis=0)
        cross = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                 - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
        assert np.all(cross >= -1e-12)
        assert point_in_convex_polygon(poly, d.points[i])


def test_facet_equidistance():
    pts = random_cloud(150, 7)
    d = voronoi(pts)
    tree = spatial.cKDTree(pts)
    for (i, j), seg in zip(d.facet_pairs, d.facet_segments):
        for q in (seg[0], seg[1], 0.5 * (seg[0] + seg[1])):
            di = np.linalg.norm(q - pts[i])
            dj = np.linalg.norm(q - pts[j])
            assert abs(di - dj) <= 1e-9
            assert tree.query(q)[0] >= di - 1e-9


def test_duality_with_delaunay_edges():
    pts = random_cloud(100, 13)
    d = voronoi(pts)
    tri = delaunay(pts)
    edges = set()
    for a, b, c in tri.triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            edges.add((min(u, v), max(u, v)))
    for i, j in d.facet_pairs:
        assert (int(i), int(j)) in edges


def test_nearest_neighbor_membership_matches_polygons():
    pts = random_cloud(60, 41)
    d = voronoi(pts)
    tree = spatial.cKDTree(pts)
    queries = np.random.default_rng(42).random((500, 2))
    for q in queries:
        i = tree.query(q)[1]
        assert point_in_convex_polygon(d.cells[i], q, tol=1e-9)


def test_determinism_bitwise():
    pts = random_cloud(300, 55)
    d1, d2 = voronoi(pts), voronoi(pts)
    assert np.array_equal(d1.facet_pairs, d2.facet_pairs)
    assert np.array_equal(d1.facet_lengths, d2.facet_lengths)
    assert all(np.array_equal(a, b) for a, b in zip(d1.cells, d2.cells))


def test_fast_facet_path_matches_full_diagram():
    pts = random_cloud(400, 77)
    d = voronoi(pts)
    pairs, lengths = voronoi_facets(pts)
    assert np.array_equal(pairs, d.facet_pairs)
    assert np.allclose(lengths, d.facet_lengths, atol=1e-9)


def test_json_and_svg_export():
    d = voronoi(random_cloud(20, 8))
    payload = json.loads(diagram_to_json(d))
    assert payload["n"] == 20
    assert len(payload["cells"]) == 20
    assert len(payload["facets"]) == len(d.facet_pairs)
    svg = diagram_to_svg(d)
    assert svg.startswith("<svg") and svg.count("<polygon") == 20
    assert diagram_to_svg(d) == svg  # deterministic
