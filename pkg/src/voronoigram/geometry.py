"""Planar Delaunay/Voronoi geometry clipped to the unit square.

Cells are convex polygons equal to the Voronoi cell intersected with the
closed unit square; facets are the shared boundary segments between cells
with positive length.  Construction is exact up to floating point: clipping
uses the reflection trick (each point mirrored across the four sides), which
makes every cell of an interior point equal to its true cell intersected
with the square.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import spatial

from .errors import DegenerateInput

# Facets shorter than this are treated as measure-zero contacts (e.g. the
# meeting point of diagonal cells in a cocircular configuration).
MIN_FACET_LENGTH = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput(f"expected an (n, 2) point array, got shape {pts.shape}")
    if not np.all((pts > 0.0) & (pts < 1.0)):
        raise DegenerateInput("all points must lie strictly inside (0, 1)^2")
    return pts


@dataclass(frozen=True)
class Triangulation:
    """Delaunay triangulation: triangles are CCW vertex-index triples."""

    vertices: np.ndarray
    triangles: np.ndarray
    adjacency: np.ndarray  # (m, 3); adjacency[t, e] = triangle across edge e, or -1


@dataclass(frozen=True)
class VoronoiDiagram:
    """Voronoi cells clipped to [0,1]^2 plus the positive-length facets."""

    points: np.ndarray
    cells: list  # cells[i] is a (k_i, 2) CCW polygon vertex loop
    facet_pairs: np.ndarray  # (m, 2) int, each row i < j
    facet_segments: np.ndarray  # (m, 2, 2) endpoints of the shared segment
    facet_lengths: np.ndarray  # (m,)
    _pair_index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        index = {tuple(p): k for k, p in enumerate(map(tuple, self.facet_pairs))}
        object.__setattr__(self, "_pair_index", index)

    @property
    def n(self) -> int:
        return len(self.points)


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of the point set, deterministic for a fixed ordering."""
    pts = _as_points(points)
    n = len(pts)
    if n < 3:
        raise DegenerateInput(f"need at least 3 points, got {n}")
    try:
        tri = spatial.Delaunay(pts)
    except spatial.QhullError as exc:
        raise DegenerateInput(f"degenerate point set: {exc}") from exc
    if tri.simplices.shape[0] == 0:
        raise DegenerateInput("all points are collinear")

    simplices = tri.simplices.copy()
    # Enforce CCW orientation.
    a, b, c = (pts[simplices[:, k]] for k in range(3))
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    # Canonical order: rotate smallest vertex first, then sort rows.
    shift = np.argmin(simplices, axis=1)
    rows = np.arange(len(simplices))[:, None]
    simplices = simplices[rows, (shift[:, None] + np.arange(3)) % 3]
    order = np.lexsort((simplices[:, 2], simplices[:, 1], simplices[:, 0]))
    simplices = simplices[order]

    adjacency = -np.ones((len(simplices), 3), dtype=int)
    edge_owner = {}
    for t, (i, j, k) in enumerate(simplices):
        for e, (u, v) in enumerate(((j, k), (k, i), (i, j))):
            key = (min(u, v), max(u, v))
            if key in edge_owner:
                t2, e2 = edge_owner[key]
                adjacency[t, e] = t2
                adjacency[t2, e2] = t
            else:
                edge_owner[key] = (t, e)
    return Triangulation(vertices=pts, triangles=simplices, adjacency=adjacency)


def _mirror(pts: np.ndarray) -> np.ndarray:
    left = np.column_stack([-pts[:, 0], pts[:, 1]])
    right = np.column_stack([2.0 - pts[:, 0], pts[:, 1]])
    bottom = np.column_stack([pts[:, 0], -pts[:, 1]])
    top = np.column_stack([pts[:, 0], 2.0 - pts[:, 1]])
    return np.concatenate([pts, left, right, bottom, top])


def _clip_segment_unit_square(p0, p1):
    """Liang-Barsky clip of segment p0->p1 against [0,1]^2; None if outside."""
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    checks = (
        (-d[0], p0[0] - 0.0),
        (d[0], 1.0 - p0[0]),
        (-d[1], p0[1] - 0.0),
        (d[1], 1.0 - p0[1]),
    )
    for p, q in checks:
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    if t0 >= t1:
        return None
    return p0 + t0 * d, p0 + t1 * d


def voronoi(points) -> VoronoiDiagram:
    """Voronoi diagram of the points, cells clipped to the closed unit square."""
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise DegenerateInput(f"need at least 2 points, got {n}")
    vor = spatial.Voronoi(_mirror(pts))

    cells = []
    for i in range(n):
        region = vor.regions[vor.point_region[i]]
        if -1 in region:  # cannot happen with mirrored input, guard anyway
            raise DegenerateInput("unbounded cell after mirroring")
        poly = vor.vertices[region]
        poly = np.clip(poly, 0.0, 1.0)  # remove floating-point excursions
        # Convex cell: order CCW by angle about the centroid.
        center = poly.mean(axis=0)
        angles = np.arctan2(poly[:, 1] - center[1], poly[:, 0] - center[0])
        poly = poly[np.argsort(angles, kind="stable")]
        # Drop near-duplicate consecutive vertices.
        keep = np.linalg.norm(poly - np.roll(poly, 1, axis=0), axis=1) > MIN_FACET_LENGTH
        cells.append(poly[keep] if keep.any() else poly)

    pairs, segments, lengths = [], [], []
    ridge_points = np.asarray(vor.ridge_points)
    for ridge, (a, b) in enumerate(ridge_points):
        if a >= n or b >= n:
            continue
        v0, v1 = vor.ridge_vertices[ridge]
        if v0 < 0 or v1 < 0:  # guard: interior ridges of the mirrored set are finite
            continue
        clipped = _clip_segment_unit_square(vor.vertices[v0], vor.vertices[v1])
        if clipped is None:
            continue
        q0, q1 = clipped
        length = float(np.linalg.norm(q1 - q0))
        if length <= MIN_FACET_LENGTH:
            continue
        i, j = (a, b) if a < b else (b, a)
        pairs.append((i, j))
        segments.append((q0, q1))
        lengths.append(length)

    if pairs:
        pairs = np.asarray(pairs, dtype=int)
        segments = np.asarray(segments, dtype=float)
        lengths = np.asarray(lengths, dtype=float)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs, segments, lengths = pairs[order], segments[order], lengths[order]
    else:
        pairs = np.empty((0, 2), dtype=int)
        segments = np.empty((0, 2, 2), dtype=float)
        lengths = np.empty(0, dtype=float)

    return VoronoiDiagram(points=pts, cells=cells, facet_pairs=pairs,
                          facet_segments=segments, facet_lengths=lengths)


def voronoi_facets(points):
    """Facet pairs and lengths only, skipping cell-polygon extraction.

    Fast path for discrete-TV sweeps at large n: runs Qhull on the raw points
    and clips each bisector ridge (reconstructing rays for unbounded ridges)
    against the unit square.  Agrees with ``voronoi(points)`` facet lengths.
    """
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise DegenerateInput(f"need at least 2 points, got {n}")
    if n < 10:
        diagram = voronoi(pts)
        return diagram.facet_pairs, diagram.facet_lengths
    vor = spatial.Voronoi(pts)
    center = pts.mean(axis=0)
    ridge_points = np.asarray(vor.ridge_points)
    ridge_vertices = np.asarray(vor.ridge_vertices)

    finite = np.all(ridge_vertices >= 0, axis=1)
    pairs_out, lengths_out = [], []

    # Finite ridges, vectorized Liang-Barsky.
    fv = ridge_vertices[finite]
    p0 = vor.vertices[fv[:, 0]]
    d = vor.vertices[fv[:, 1]] - p0
    t0 = np.zeros(len(p0))
    t1 = np.ones(len(p0))
    ok = np.ones(len(p0), dtype=bool)
    for p, q in (
        (-d[:, 0], p0[:, 0]),
        (d[:, 0], 1.0 - p0[:, 0]),
        (-d[:, 1], p0[:, 1]),
        (d[:, 1], 1.0 - p0[:, 1]),
    ):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = q / p
        zero = p == 0.0
        ok &= ~(zero & (q < 0.0))
        neg = (p < 0.0) & ok
        pos = (p > 0.0) & ok
        t0[neg] = np.maximum(t0[neg], r[neg])
        t1[pos] = np.minimum(t1[pos], r[pos])
    ok &= t1 > t0
    seg_len = np.linalg.norm(d, axis=1) * np.maximum(t1 - t0, 0.0)
    keep = ok & (seg_len > MIN_FACET_LENGTH)
    pairs_out.append(ridge_points[finite][keep])
    lengths_out.append(seg_len[keep])

    # Unbounded ridges: reconstruct the ray, then clip.
    far = 4.0  # any length that reaches past the unit square from inside it
    for ridge in np.nonzero(~finite)[0]:
        a, b = ridge_points[ridge]
        v0, v1 = ridge_vertices[ridge]
        tangent = pts[b] - pts[a]
        tangent = tangent / np.linalg.norm(tangent)
        normal = np.array([-tangent[1], tangent[0]])
        midpoint = 0.5 * (pts[a] + pts[b])
        if np.dot(normal, midpoint - center) < 0:
            normal = -normal
        if v0 < 0 and v1 < 0:
            e0 = midpoint - far * normal
            e1 = midpoint + far * normal
        else:
            vertex = vor.vertices[max(v0, v1)]
            e0 = vertex
            e1 = vertex + far * (far + np.linalg.norm(vertex)) * normal
        clipped = _clip_segment_unit_square(e0, e1)
        if clipped is None:
            continue
        length = float(np.linalg.norm(clipped[1] - clipped[0]))
        if length > MIN_FACET_LENGTH:
            pairs_out.append(np.array([[a, b]]))
            lengths_out.append(np.array([length]))

    pairs = np.concatenate(pairs_out) if pairs_out else np.empty((0, 2), dtype=int)
    lengths = np.concatenate(lengths_out) if lengths_out else np.empty(0)
    lo = pairs.min(axis=1) if len(pairs) else pairs[:, 0]
    hi = pairs.max(axis=1) if len(pairs) else pairs[:, 0]
    pairs = np.column_stack([lo, hi])
    order = np.lexsort((pairs[:, 1], pairs[:, 0])) if len(pairs) else []
    return pairs[order], lengths[order]


def facet_length(diagram: VoronoiDiagram, i: int, j: int) -> float:
    """Length of the shared boundary between cells i and j (0 if not adjacent)."""
    if i == j:
        raise ValueError("facet_length requires i != j")
    key = (i, j) if i < j else (j, i)
    k = diagram._pair_index.get(key)
    return 0.0 if k is None else float(diagram.facet_lengths[k])


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def cell_area(diagram: VoronoiDiagram, i: int) -> float:
    """Shoelace area of the clipped cell polygon."""
    return polygon_area(diagram.cells[i])


def cell_areas(diagram: VoronoiDiagram) -> np.ndarray:
    return np.array([polygon_area(c) for c in diagram.cells])


def diagram_to_json(diagram: VoronoiDiagram) -> str:
    payload = {
        "n": diagram.n,
        "points": diagram.points.tolist(),
        "cells": [c.tolist() for c in diagram.cells],
        "facets": [
            [int(i), int(j), float(w)]
            for (i, j), w in zip(diagram.facet_pairs, diagram.facet_lengths)
        ],
    }
    return json.dumps(payload)


def diagram_to_svg(diagram: VoronoiDiagram, width: int = 600) -> str:
    """Plain SVG rendering of the cell boundaries (deterministic output)."""
    s = width
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" '
        f'viewBox="0 0 {s} {s}">',
        f'<rect x="0" y="0" width="{s}" height="{s}" fill="white" stroke="black"/>',
    ]
    for poly in diagram.cells:
        coords = " ".join(f"{x * s:.3f},{(1 - y) * s:.3f}" for x, y in poly)
        parts.append(f'<polygon points="{coords}" fill="none" stroke="steelblue" stroke-width="1"/>')
    for x, y in diagram.points:
        parts.append(f'<circle cx="{x * s:.3f}" cy="{(1 - y) * s:.3f}" r="2" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts)
