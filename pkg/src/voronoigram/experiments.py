"""Desk-scale reproductions of the TV-convergence and MSE studies.

All randomness flows from a single master seed through counter-based
``SeedSequence`` spawn keys, so results are independent of execution order
and thread count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BadConfig
from .estimators import (PiecewiseConstantFn, RegressionDataset, fit_graph_tvd,
                         fit_voronoigram, l2_pn_error, l2_p_error)
from .geometry import VoronoiDiagram, voronoi, voronoi_facets
from .graphs import (Epsilon, ExactVoronoi, Knn, UnitVoronoi, build_eps_graph,
                     build_knn_graph, graph_from_facets, discrete_tv)
from .limits import limit_prediction
from .solver import SolverOptions, TvFit, lambda_upper_bound, tv_denoise

BALL_CENTER = np.array([0.5, 0.5])
BALL_RADIUS = 0.25
ANNULUS_INNER = 0.15
ANNULUS_OUTER = 0.35
ANNULUS_AREA = math.pi * (ANNULUS_OUTER ** 2 - ANNULUS_INNER ** 2)


@dataclass(frozen=True)
class SamplingModel:
    """Piecewise-constant design density: one value on the annulus around the
    signal boundary, another (mass-balancing) value elsewhere."""

    name: str
    inside_density: float | None  # None = uniform on the square

    def __post_init__(self):
        if self.inside_density is not None and self.inside_density <= 0:
            raise BadConfig("annulus density must be positive")

    @property
    def outside_density(self) -> float:
        if self.inside_density is None:
            return 1.0
        return (1.0 - self.inside_density * ANNULUS_AREA) / (1.0 - ANNULUS_AREA)

    @property
    def annulus_mass(self) -> float:
        if self.inside_density is None:
            return ANNULUS_AREA
        return self.inside_density * ANNULUS_AREA

    def density(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.inside_density is None:
            return np.ones(len(x))
        r = np.linalg.norm(x - BALL_CENTER, axis=1)
        inside = (r >= ANNULUS_INNER) & (r <= ANNULUS_OUTER)
        return np.where(inside, self.inside_density, self.outside_density)

    def density_on_signal_boundary(self) -> float:
        # The circle r = BALL_RADIUS lies inside the annulus.
        return 1.0 if self.inside_density is None else self.inside_density

    def ball_probability(self) -> float:
        inner_disk = math.pi * ANNULUS_INNER ** 2
        ring = math.pi * (BALL_RADIUS ** 2 - ANNULUS_INNER ** 2)
        if self.inside_density is None:
            return inner_disk + ring
        return self.outside_density * inner_disk + self.inside_density * ring

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.inside_density is None:
            pts = rng.random((n, 2))
        else:
            in_annulus = rng.random(n) < self.annulus_mass
            pts = np.empty((n, 2))
            k = int(in_annulus.sum())
            # Annulus: exact inverse sampling in polar coordinates.
            rr = np.sqrt(rng.random(k) * (ANNULUS_OUTER ** 2 - ANNULUS_INNER ** 2)
                         + ANNULUS_INNER ** 2)
            phi = rng.random(k) * 2 * math.pi
            pts[in_annulus] = BALL_CENTER + np.column_stack([rr * np.cos(phi),
                                                             rr * np.sin(phi)])
            # Complement: rejection against the annulus.
            todo = np.nonzero(~in_annulus)[0]
            while len(todo):
                cand = rng.random((len(todo), 2))
                r = np.linalg.norm(cand - BALL_CENTER, axis=1)
                good = (r < ANNULUS_INNER) | (r > ANNULUS_OUTER)
                pts[todo[good]] = cand[good]
                todo = todo[~good]
        return np.clip(pts, 1e-12, 1 - 1e-12)


def sampling_model(name: str) -> SamplingModel:
    models = {
        "uniform": SamplingModel("uniform", None),
        "lowtube": SamplingModel("lowtube", 0.295),
        "hightube": SamplingModel("hightube", 1.2),
    }
    try:
        return models[name]
    except KeyError:
        raise BadConfig(f"unknown sampling model {name!r}") from None


def sample_design(model: SamplingModel, n: int, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return model.sample(n, rng)


def f0_indicator_ball(x) -> np.ndarray:
    """Indicator of the ball B((1/2, 1/2), 1/4)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return (np.linalg.norm(x - BALL_CENTER, axis=1) <= BALL_RADIUS).astype(float)


def noise_sigma(model: SamplingModel, snr: float) -> float:
    """sigma with Var(f0(x_i)) / sigma^2 = snr, f0 a Bernoulli indicator under P."""
    if snr <= 0:
        raise BadConfig("snr must be positive")
    p = model.ball_probability()
    return math.sqrt(p * (1.0 - p) / snr)


@dataclass
class ExperimentConfig:
    seed: int = 20260826
    models: tuple = ("uniform", "lowtube", "hightube")
    # TV-convergence sweep
    tv_n_grid: tuple = tuple(int(round(v)) for v in np.logspace(2, 5, 10))
    tv_repetitions: int = 20
    # Calibrated so the average eps/kNN degree at n = 1274 matches the Voronoi
    # graph's average degree (~6); frozen here.
    knn_c1: float = 0.7
    eps_c2: float = 0.47
    eps_schedule: str = "calibrated"  # or "plain": eps = sqrt(log n / n)
    # MSE sweep
    mse_n: int = 1274
    mse_repetitions: int = 20
    snr: float = 1.0
    lambda_grid_size: int = 15
    lambda_min_factor: float = 1e-4
    mc_samples: int = 100_000
    compute_l2p: bool = True
    threads: int = 1
    output_dir: str = "runs"

    def __post_init__(self):
        if self.tv_repetitions < 1 or self.mse_repetitions < 1:
            raise BadConfig("repetitions must be at least 1")
        if any(n < 10 for n in self.tv_n_grid) or self.mse_n < 10:
            raise BadConfig("n must be at least 10")
        if self.eps_schedule not in ("calibrated", "plain"):
            raise BadConfig("eps_schedule must be 'calibrated' or 'plain'")
        for name in self.models:
            sampling_model(name)

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["models"] = list(d["models"])
        d["tv_n_grid"] = list(d["tv_n_grid"])
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise BadConfig(f"unknown config fields: {sorted(unknown)}")
        for key in ("models", "tv_n_grid"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise BadConfig(str(exc)) from exc


def eps_for(config: ExperimentConfig, n: int) -> float:
    if config.eps_schedule == "plain":
        return math.sqrt(math.log(n) / n)
    return config.eps_c2 * math.sqrt(math.log(n) ** 1.1 / n)


def k_for(config: ExperimentConfig, n: int) -> int:
    return max(1, int(math.floor(config.knn_c1 * math.log(n) ** 1.1)))


def _spawned_rng(master_seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


TV_CSV_HEADER = "model,graph,n,rep,param,dtv,rescaled_dtv,reference"


def _tv_task(args):
    config_json, model_name, model_index, n, rep = args
    config = ExperimentConfig.from_json(config_json)
    model = sampling_model(model_name)
    rng = _spawned_rng(config.seed, 1, model_index, n, rep)
    pts = model.sample(n, rng)
    f = f0_indicator_ball(pts)
    rows = []

    pairs, lengths = voronoi_facets(pts)
    crossing = f[pairs[:, 0]] != f[pairs[:, 1]]
    dtv_vor = float(lengths[crossing].sum())
    ref_vor = limit_prediction("voronoi", BALL_RADIUS, model.density_on_signal_boundary())
    rows.append((model_name, "voronoi", n, rep, "", dtv_vor, dtv_vor, ref_vor))

    eps = eps_for(config, n)
    g_eps = build_eps_graph(pts, eps)
    dtv_eps = discrete_tv(g_eps, f)
    ref_eps = limit_prediction("eps", BALL_RADIUS, model.density_on_signal_boundary())
    rows.append((model_name, "eps", n, rep, repr(eps), dtv_eps,
                 dtv_eps / (n ** 2 * eps ** 3), ref_eps))

    k = k_for(config, n)
    g_knn = build_knn_graph(pts, k)
    dtv_knn = discrete_tv(g_knn, f)
    eps_bar = math.sqrt(k / n)
    rows.append((model_name, "knn", n, rep, str(k), dtv_knn,
                 dtv_knn / (n ** 2 * eps_bar ** 3), ""))
    return rows


def _run_tasks(tasks, worker, threads: int):
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, tasks))
    return [worker(t) for t in tasks]


def _format_row(row) -> str:
    out = []
    for v in row:
        if isinstance(v, float):
            out.append(repr(float(v)))
        else:
            out.append(str(v))
    return ",".join(out)


def tv_estimation_sweep(config: ExperimentConfig):
    """Discrete TV of the ball indicator on all three graphs; returns CSV lines."""
    cfg_json = config.to_json()
    tasks = [(cfg_json, name, mi, n, rep)
             for mi, name in enumerate(config.models)
             for n in config.tv_n_grid
             for rep in range(config.tv_repetitions)]
    lines = [TV_CSV_HEADER]
    for rows in _run_tasks(tasks, _tv_task, config.threads):
        lines.extend(_format_row(r) for r in rows)
    return lines


MSE_CSV_HEADER = "model,estimator,n,rep,lambda,df,l2pn,l2p,l2p_se"

MSE_ESTIMATORS = ("voronoi", "voronoi-unit", "eps", "knn")


def _mse_task(args):
    config_json, model_name, model_index, rep = args
    config = ExperimentConfig.from_json(config_json)
    model = sampling_model(model_name)
    n = config.mse_n
    rng = _spawned_rng(config.seed, 2, model_index, rep)
    pts = model.sample(n, rng)
    truth = f0_indicator_ball(pts)
    sigma = noise_sigma(model, config.snr)
    y = truth + sigma * rng.standard_normal(n)

    diagram = voronoi(pts)
    graphs = {
        "voronoi": graph_from_facets(n, diagram.facet_pairs, diagram.facet_lengths,
                                     ExactVoronoi()),
        "voronoi-unit": graph_from_facets(n, diagram.facet_pairs, diagram.facet_lengths,
                                          UnitVoronoi()),
        "eps": build_eps_graph(pts, eps_for(config, n)),
        "knn": build_knn_graph(pts, k_for(config, n)),
    }
    opts = SolverOptions(certify=False, abs_tol=1e-8, rel_tol=1e-6, max_iter=5000)
    rows = []
    for est_name in MSE_ESTIMATORS:
        graph = graphs[est_name]
        lam_max = lambda_upper_bound(graph, y)
        grid = lam_max * np.logspace(math.log10(config.lambda_min_factor), 0,
                                     config.lambda_grid_size)
        warm = None
        for lam in grid[::-1]:
            fit = tv_denoise(graph, y, float(lam), opts, warm=warm)
            warm = fit
            if config.compute_l2p:
                fn = PiecewiseConstantFn(pts, fit.theta)
                l2p, l2p_se = l2_p_error(fn, f0_indicator_ball, model.sample,
                                         config.mc_samples,
                                         seed=config.seed + 104729)
            else:
                l2p, l2p_se = float("nan"), float("nan")
            rows.append((model_name, est_name, n, rep, float(lam),
                         fit.n_components, l2_pn_error(fit.theta, truth),
                         l2p, l2p_se))
    return rows


def mse_sweep(config: ExperimentConfig):
    """Risk sweep over the lambda grid for all four TV estimators; CSV lines."""
    cfg_json = config.to_json()
    tasks = [(cfg_json, name, mi, rep)
             for mi, name in enumerate(config.models)
             for rep in range(config.mse_repetitions)]
    lines = [MSE_CSV_HEADER]
    for rows in _run_tasks(tasks, _mse_task, config.threads):
        lines.extend(_format_row(r) for r in rows)
    return lines


def run_manifest(config: ExperimentConfig, command: str) -> str:
    from . import __version__
    from .limits import limit_constants

    cfg_json = config.to_json()
    const = limit_constants(2)
    return json.dumps({
        "command": command,
        "version": __version__,
        "config": json.loads(cfg_json),
        "config_sha256": hashlib.sha256(cfg_json.encode()).hexdigest(),
        "constants": dataclasses.asdict(const),
    }, indent=2, sort_keys=True)


def write_lines(lines, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def render_fit(fn: PiecewiseConstantFn, fit: TvFit, diagram: VoronoiDiagram, path,
               fuse_tol: float = None) -> None:
    """Voronoi cells filled by fitted value, fused-region boundaries stroked.

    Output format follows the file extension (.svg / .png); SVG output is
    deterministic (fixed hash salt, no timestamp metadata).
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import LineCollection, PolyCollection

    matplotlib.rcParams["svg.hashsalt"] = "voronoigram"

    theta = fn.values
    tol = fuse_tol if fuse_tol is not None else 1e-7 * max(np.ptp(theta), 1.0)
    fig, ax = plt.subplots(figsize=(6, 6))
    polys = PolyCollection(diagram.cells, array=theta, cmap="viridis",
                           edgecolors="none")
    ax.add_collection(polys)
    boundary = np.abs(theta[diagram.facet_pairs[:, 0]]
                      - theta[diagram.facet_pairs[:, 1]]) > tol
    segments = diagram.facet_segments[boundary]
    if len(segments):
        ax.add_collection(LineCollection(segments, colors="black", linewidths=1.0))
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_title(f"lambda={fit.lam:g}, components={fit.n_components}")
    fig.colorbar(polys, ax=ax, shrink=0.8)
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)
