"""Command-line interface: reproducible data generation, fitting, and sweeps."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import BadConfig
from .estimators import PiecewiseConstantFn, RegressionDataset, fit_graph_tvd, fit_voronoigram
from .geometry import voronoi
from .graphs import (ClippedVoronoi, Epsilon, ExactVoronoi, Knn, UnitVoronoi,
                     discrete_tv, load_graph)
from .limits import limit_constants
from .solver import SolverOptions, fit_to_json
from .experiments import (ExperimentConfig, f0_indicator_ball, mse_sweep,
                          noise_sigma, render_fit, run_manifest, sampling_model,
                          tv_estimation_sweep, write_lines)


def _fail(message: str, code: int = 1):
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    raise SystemExit(code)


def _read_data_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, :2], rows[:, 2]


def _write_data_csv(path, points, y):
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y,response\n")
        for (px, py), v in zip(points, y):
            fh.write(f"{float(px)!r},{float(py)!r},{float(v)!r}\n")


def _threads_default() -> int:
    env = os.environ.get("VORONOIGRAM_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def cmd_gen_data(args):
    model = sampling_model(args.model)
    rng = np.random.default_rng(args.seed)
    pts = model.sample(args.n, rng)
    truth = f0_indicator_ball(pts)
    sigma = noise_sigma(model, args.snr)
    y = truth + sigma * rng.standard_normal(args.n)
    _write_data_csv(args.out, pts, y)
    return 0


def _scheme_from_args(args):
    return {
        "voronoi": ExactVoronoi(),
        "voronoi-unit": UnitVoronoi(),
        "voronoi-clipped": ClippedVoronoi(args.c0),
        "eps": Epsilon(args.eps) if args.eps > 0 else Epsilon(1e-300),
        "knn": Knn(args.k),
    }[args.graph]


def cmd_fit(args):
    points, y = _read_data_csv(getattr(args, "in"))
    data = RegressionDataset(points=points, y=y)
    opts = SolverOptions()
    if args.graph in ("voronoi", "voronoi-unit", "voronoi-clipped"):
        diagram = voronoi(points)
        fit, fn = fit_voronoigram(data, args.lam, _scheme_from_args(args), opts,
                                  diagram=diagram)
    else:
        diagram = None
        fit, fn = fit_graph_tvd(data, _scheme_from_args(args), args.lam, opts)
    with open(args.out, "w") as fh:
        fh.write(fit_to_json(fit) + "\n")
    if args.svg:
        if diagram is None:
            diagram = voronoi(points)
        render_fit(fn, fit, diagram, args.svg)
    if not fit.converged:
        _fail(f"solver did not converge: primal={fit.primal_residual:g} "
              f"dual={fit.dual_residual:g} after {fit.iterations} iterations", 2)
    return 0


def cmd_dtv(args):
    graph = load_graph(args.graph_file)
    values = np.loadtxt(args.values_file, ndmin=1)
    print(repr(discrete_tv(graph, values)))
    return 0


def cmd_constants(args):
    import dataclasses

    const = limit_constants(args.d)
    print(json.dumps(dataclasses.asdict(const), indent=2, sort_keys=True))
    return 0


def _load_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            config = ExperimentConfig.from_json(fh.read())
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out_dir is not None:
        overrides["output_dir"] = args.out_dir
    if overrides:
        import dataclasses
        config = dataclasses.replace(config, **overrides)
    if config.threads < 1:
        config = __import__("dataclasses").replace(config, threads=_threads_default())
    return config


def _sweep_figure(csv_path, fig_path, x_col, y_col, group_cols):
    """Quick-look figure alongside the delimited output."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import csv as csvmod

    with open(csv_path) as fh:
        rows = list(csvmod.DictReader(fh))
    groups = {}
    for row in rows:
        key = tuple(row[c] for c in group_cols)
        groups.setdefault(key, []).append((float(row[x_col]), float(row[y_col])))
    fig, ax = plt.subplots(figsize=(7, 5))
    for key, pts in sorted(groups.items()):
        xs = sorted(set(x for x, _ in pts))
        means = [np.mean([y for x, y in pts if x == xv]) for xv in xs]
        ax.plot(xs, means, marker="o", label="/".join(key))
    ax.set_xscale("log")
    ax.set_xlabel(x_col)
    ax.set_ylabel(f"mean {y_col}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(fig_path)
    plt.close(fig)


def cmd_sweep_tv(args):
    config = _load_config(args)
    lines = tv_estimation_sweep(config)
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "sweep_tv.csv")
    write_lines(lines, csv_path)
    with open(os.path.join(out_dir, "sweep_tv_manifest.json"), "w") as fh:
        fh.write(run_manifest(config, "sweep-tv") + "\n")
    _sweep_figure(csv_path, os.path.join(out_dir, "sweep_tv.png"),
                  "n", "rescaled_dtv", ("model", "graph"))
    return 0


def cmd_sweep_mse(args):
    config = _load_config(args)
    lines = mse_sweep(config)
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "sweep_mse.csv")
    write_lines(lines, csv_path)
    with open(os.path.join(out_dir, "sweep_mse_manifest.json"), "w") as fh:
        fh.write(run_manifest(config, "sweep-mse") + "\n")
    _sweep_figure(csv_path, os.path.join(out_dir, "sweep_mse.png"),
                  "df", "l2pn", ("model", "estimator"))
    return 0


def cmd_render(args):
    points, _ = _read_data_csv(args.data)
    with open(args.fit) as fh:
        payload = json.load(fh)
    theta = np.asarray(payload["theta"], dtype=float)
    fn = PiecewiseConstantFn(points, theta)
    diagram = voronoi(points)

    class _Shim:
        lam = payload.get("lambda", float("nan"))
        n_components = payload.get("K", 0)

    render_fit(fn, _Shim(), diagram, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voronoigram",
        description="TV-regularized regression on Voronoi / epsilon / kNN graphs. "
                    "Data files are CSV with header 'x,y,response'; fits are JSON; "
                    "figures are SVG or PNG by extension.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a design and noisy responses")
    p.add_argument("--model", default="uniform", choices=("uniform", "lowtube", "hightube"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--snr", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("fit", help="fit a graph TV denoising estimator")
    p.add_argument("--graph", required=True,
                   choices=("voronoi", "voronoi-unit", "voronoi-clipped", "eps", "knn"))
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--in", dest="in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None, help="optional rendered figure path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("dtv", help="discrete TV of stored values on a stored graph")
    p.add_argument("--graph-file", required=True)
    p.add_argument("--values-file", required=True)
    p.set_defaults(func=cmd_dtv)

    p = sub.add_parser("constants", help="asymptotic limit constants as JSON")
    p.add_argument("--d", type=int, default=2)
    p.set_defaults(func=cmd_constants)

    for name, fn in (("sweep-tv", cmd_sweep_tv), ("sweep-mse", cmd_sweep_mse)):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} experiment")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("render", help="render a stored fit over its data")
    p.add_argument("--fit", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (BadConfig, OSError, ValueError) as exc:
        _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
