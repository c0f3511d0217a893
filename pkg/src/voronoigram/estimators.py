"""End-to-end regression estimators and risk metrics.

Voronoigram (exact / clipped / unit weights), TV denoising on epsilon and kNN
graphs with nearest-neighbor extrapolation, and the Haar hard-thresholding
baseline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import spatial, sparse
from scipy.sparse import csgraph

from .errors import ShapeMismatch
from .geometry import VoronoiDiagram, voronoi
from .graphs import (ClippedVoronoi, Epsilon, ExactVoronoi, Knn, UnitVoronoi,
                     WeightedGraph, build_eps_graph, build_knn_graph,
                     build_voronoi_graph, discrete_tv)
from .solver import SolverOptions, TvFit, tv_denoise


@dataclass
class RegressionDataset:
    points: np.ndarray
    y: np.ndarray
    sigma: float | None = None
    truth: object = None  # optional callable f0(points) -> values

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if len(self.points) != len(self.y):
            raise ShapeMismatch("points and responses length mismatch")

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass
class PiecewiseConstantFn:
    """Nearest-design-point extension of per-point values (piecewise constant
    on the Voronoi cells; boundary ties go to the lowest index)."""

    points: np.ndarray
    values: np.ndarray
    _tree: object = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.points) != len(self.values):
            raise ShapeMismatch("points and values length mismatch")
        self._tree = spatial.cKDTree(self.points)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, idx = self._tree.query(x)
        out = self.values[idx]
        return out if len(out) > 1 else float(out[0])

    def nearest_index(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self._tree.query(x)[1]

    def to_json(self) -> str:
        return json.dumps({"points": self.points.tolist(), "values": self.values.tolist()})


def evaluate(fn: PiecewiseConstantFn, x):
    return fn(x)


def fit_voronoigram(data: RegressionDataset, lam: float, scheme=ExactVoronoi(),
                    opts: SolverOptions = None, diagram: VoronoiDiagram = None,
                    warm: TvFit = None):
    """TV denoising on the Voronoi adjacency graph; returns (fit, extrapolant)."""
    if diagram is None:
        diagram = voronoi(data.points)
    graph = build_voronoi_graph(diagram, scheme)
    fit = tv_denoise(graph, data.y, lam, opts, warm=warm)
    return fit, PiecewiseConstantFn(data.points, fit.theta)


def fit_graph_tvd(data: RegressionDataset, graph_kind, lam: float,
                  opts: SolverOptions = None, warm: TvFit = None):
    """TV denoising on an epsilon or kNN graph with 1NN extrapolation.

    Isolated epsilon-graph nodes keep their raw responses (they carry no
    penalty edges), which is the documented degradation mode of that graph.
    """
    if isinstance(graph_kind, Epsilon):
        graph = build_eps_graph(data.points, graph_kind.eps)
    elif isinstance(graph_kind, Knn):
        graph = build_knn_graph(data.points, graph_kind.k)
    else:
        raise ValueError(f"expected Epsilon or Knn, got {graph_kind!r}")
    fit = tv_denoise(graph, data.y, lam, opts, warm=warm)
    return fit, PiecewiseConstantFn(data.points, fit.theta)


def lambda_theory(scheme, n: int, sigma: float, alpha: float, c: float = 1.0) -> float:
    """Theoretical tuning schedules.

    Clipped Voronoi: c sigma n^{1/2} (log n)^{1/2 + alpha}  (d = 2);
    unit Voronoi:    c sigma (log n)^{1/2 + alpha};
    epsilon / kNN:   c sigma (log n)^{1/2 - alpha}.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    logn = math.log(n)
    if isinstance(scheme, ClippedVoronoi):
        return c * sigma * math.sqrt(n) * logn ** (0.5 + alpha)
    if isinstance(scheme, UnitVoronoi):
        return c * sigma * logn ** (0.5 + alpha)
    if isinstance(scheme, (Epsilon, Knn)):
        return c * sigma * logn ** (0.5 - alpha)
    raise ValueError(f"no theoretical schedule for scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Haar wavelet baseline
# ---------------------------------------------------------------------------

def haar_psi(x):
    """Univariate Haar mother wavelet: +1 on (0, 1/2], -1 on (1/2, 1], 0 outside.

    Cells are half-open on the right so that dyadic boundary points belong to
    the cell on their left, consistently with the coefficient binning.
    """
    x = np.asarray(x, dtype=float)
    return np.where((x > 0) & (x <= 0.5), 1.0, 0.0) - np.where((x > 0.5) & (x <= 1), 1.0, 0.0)


def wavelet_threshold(n: int, delta: float) -> float:
    """8 n^{-1/2} log^{3/2}(2n / delta), natural log."""
    return 8.0 * n ** -0.5 * math.log(2 * n / delta) ** 1.5


def _orientations(d: int):
    out = []
    for code in range(1, 2 ** d):
        out.append(tuple((code >> (d - 1 - a)) & 1 for a in range(d)))
    return out


@dataclass
class WaveletFit:
    ybar: float
    coefficients: dict  # (level, cell tuple, orientation tuple) -> value
    threshold: float
    level_cap: int
    d: int

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(x), self.ybar)
        for (level, cell, orient), coef in self.coefficients.items():
            scale = 2.0 ** level
            local = scale * x - np.asarray(cell, dtype=float)
            inside = np.all((local > 0) & (local <= 1), axis=1)
            if not inside.any():
                continue
            val = np.ones(inside.sum())
            for axis, bit in enumerate(orient):
                if bit:
                    val *= haar_psi(local[inside, axis])
            out[inside] += coef * 2.0 ** (level * self.d / 2.0) * val
        return out if len(out) > 1 else float(out[0])


def empirical_wavelet_coefficients(points, y, level: int):
    """All empirical tensor-Haar coefficients at one level: (1/n) sum y_j Psi_{lk}^i(x_j).

    Returns a dict (cell tuple, orientation tuple) -> value.
    """
    pts = np.asarray(points, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = pts.shape
    cells = 2 ** level
    # Half-open cells (a, b]: index = ceil(x * 2^level) - 1.
    fine = np.ceil(pts * (2 * cells)).astype(int) - 1
    cell_idx = fine // 2
    half = fine % 2  # 0 -> left half (+1 under psi), 1 -> right half (-1)
    scale = 2.0 ** (level * d / 2.0) / n
    out = {}
    flat = np.zeros((cells,) * d + (2,) * d)
    coords = tuple(cell_idx[:, a] for a in range(d)) + tuple(half[:, a] for a in range(d))
    np.add.at(flat, coords, y)
    signs = {0: np.array([1.0, 1.0]), 1: np.array([1.0, -1.0])}
    for orient in _orientations(d):
        weight = np.ones((2,) * d)
        for axis, bit in enumerate(orient):
            shape = [1] * d
            shape[axis] = 2
            weight = weight * signs[bit].reshape(shape)
        summed = np.tensordot(flat, weight, axes=(tuple(range(d, 2 * d)), tuple(range(d))))
        nz = np.argwhere(summed != 0)
        for cell in nz:
            out[(tuple(int(c) for c in cell), orient)] = scale * float(summed[tuple(cell)])
    return out


def fit_wavelet(data: RegressionDataset, delta: float = 0.1, lam: float = None,
                level_cap: int = None) -> WaveletFit:
    """Hard-thresholded tensor-Haar estimator for a (nominally uniform) design.

    Threshold defaults to the theoretical schedule 8 n^{-1/2} log^{3/2}(2n/delta);
    truncation defaults to floor(log2(n) / d).
    """
    n, d = data.points.shape
    if lam is None:
        lam = wavelet_threshold(n, delta)
    if level_cap is None:
        level_cap = int(math.floor(math.log2(n) / d))
    coeffs = {}
    for level in range(level_cap + 1):
        for (cell, orient), value in empirical_wavelet_coefficients(
                data.points, data.y, level).items():
            if abs(value) >= lam:
                coeffs[(level, cell, orient)] = value
    return WaveletFit(ybar=float(data.y.mean()), coefficients=coeffs,
                      threshold=lam, level_cap=level_cap, d=d)


# ---------------------------------------------------------------------------
# Risk metrics and structural checks
# ---------------------------------------------------------------------------

def l2_pn_error(theta_hat, truth_values) -> float:
    """Mean squared error at the design points."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    truth_values = np.asarray(truth_values, dtype=float)
    if theta_hat.shape != truth_values.shape:
        raise ShapeMismatch("length mismatch")
    return float(np.mean((theta_hat - truth_values) ** 2))


def l2_p_error(fn, truth, sampler, n_samples: int = 100_000, seed: int = 7):
    """Monte-Carlo L2(P) error of ``fn`` against ``truth``; returns (estimate, stderr).

    ``sampler(n, rng)`` draws from the design distribution P.
    """
    rng = np.random.default_rng(seed)
    x = sampler(n_samples, rng)
    sq = (np.asarray(fn(x), dtype=float) - np.asarray(truth(x), dtype=float)) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_samples))


def continuum_tv(diagram: VoronoiDiagram, theta) -> float:
    """Continuum TV of the piecewise-constant extension, via the facet formula."""
    theta = np.asarray(theta, dtype=float)
    if diagram.facet_pairs.size == 0:
        return 0.0
    diffs = theta[diagram.facet_pairs[:, 0]] - theta[diagram.facet_pairs[:, 1]]
    return float(np.abs(diffs) @ diagram.facet_lengths)


def count_constant_regions(diagram: VoronoiDiagram, theta, tol: float) -> int:
    """Connected constant regions of the extension: cells merged across facets
    whose endpoint values agree within ``tol``."""
    theta = np.asarray(theta, dtype=float)
    pairs = diagram.facet_pairs
    if len(pairs):
        keep = np.abs(theta[pairs[:, 0]] - theta[pairs[:, 1]]) <= tol
        pairs = pairs[keep]
    adj = sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                            shape=(diagram.n, diagram.n))
    return int(csgraph.connected_components(adj, directed=False)[0])
