"""Shared independent oracles for the test suite.

These deliberately avoid the library's own geometric code paths: the coarea
oracle works on a pixel grid through marching squares, and the ball-overlap
areas come from 1-d quadrature of chord lengths.
"""

import math

import numpy as np
from scipy import integrate, spatial

BALL_CENTER = (0.5, 0.5)
BALL_RADIUS = 0.25


def coarea_tv_pm1(points, labels, grid=2000):
    """TV of the +/-1 nearest-neighbor extension via a grid perimeter oracle.

    Builds the signed field g(x) = dist(x, positive sites) - dist(x, negative
    sites), whose zero level set is exactly the boundary between the two label
    regions, and measures the marching-squares contour length on a grid x grid
    lattice.  TV = 2 * boundary length since the values differ by 2.
    """
    pts = np.asarray(points, dtype=float)
    lab = np.asarray(labels, dtype=float)
    pos = spatial.cKDTree(pts[lab > 0])
    neg = spatial.cKDTree(pts[lab < 0])
    ax = (np.arange(grid) + 0.5) / grid
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    q = np.column_stack([X.ravel(), Y.ravel()])
    g = (pos.query(q)[0] - neg.query(q)[0]).reshape(grid, grid)
    from skimage import measure

    length = 0.0
    for contour in measure.find_contours(g, 0.0):
        seg = np.diff(contour, axis=0) / grid
        length += float(np.sqrt((seg ** 2).sum(axis=1)).sum())
    return 2.0 * length


def ball_rect_area(x0, x1, y0, y1, center=BALL_CENTER, radius=BALL_RADIUS):
    """Area of the ball intersected with [x0,x1] x [y0,y1], by chord quadrature."""
    cx, cy = center
    corners = [(x, y) for x in (x0, x1) for y in (y0, y1)]
    far = max(math.hypot(x - cx, y - cy) for x, y in corners)
    nx = min(max(x0, cx), x1)
    ny = min(max(y0, cy), y1)
    near = math.hypot(nx - cx, ny - cy)
    if near >= radius:
        return 0.0
    if far <= radius:
        return (x1 - x0) * (y1 - y0)
    lo = max(x0, cx - radius)
    hi = min(x1, cx + radius)

    def chord(x):
        h = math.sqrt(max(radius ** 2 - (x - cx) ** 2, 0.0))
        return max(min(y1, cy + h) - max(y0, cy - h), 0.0)

    val, _ = integrate.quad(chord, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def ball_indicator_haar_coefficients(level):
    """Population tensor-Haar coefficients of the ball indicator at one level (d=2).

    Returns arrays (theta_10, theta_01, theta_11), each of shape (2^l, 2^l),
    computed from quadrature cell-overlap areas.
    """
    cells = 2 ** level
    half = 2 * cells
    areas = np.zeros((half, half))
    for i in range(half):
        for j in range(half):
            areas[i, j] = ball_rect_area(i / half, (i + 1) / half,
                                         j / half, (j + 1) / half)
    a00 = areas[0::2, 0::2]
    a10 = areas[1::2, 0::2]
    a01 = areas[0::2, 1::2]
    a11 = areas[1::2, 1::2]
    scale = 2.0 ** level  # 2^{l d / 2} at d = 2
    theta_10 = scale * ((a00 + a01) - (a10 + a11))  # psi in x, constant in y
    theta_01 = scale * ((a00 + a10) - (a01 + a11))
    theta_11 = scale * ((a00 + a11) - (a10 + a01))
    return theta_10, theta_01, theta_11


def uniform_square_pair_probability(eps):
    """P(||X - Y|| <= eps) for X, Y independent uniform on the unit square."""
    return math.pi * eps ** 2 - 8.0 * eps ** 3 / 3.0 + eps ** 4 / 2.0


def point_in_convex_polygon(poly, x, tol=1e-9):
    """Membership in a CCW convex polygon, boundary-inclusive up to tol."""
    a = np.asarray(poly)
    b = np.roll(a, -1, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (x[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (x[0] - a[:, 0])
    return bool(np.all(cross >= -tol))
