import json
import math

import numpy as np
import pytest

from voronoigram import (BadConfig, ExperimentConfig, f0_indicator_ball,
                         mse_sweep, noise_sigma, render_fit, sample_design,
                         sampling_model, tv_estimation_sweep, voronoi)
from voronoigram.experiments import (ANNULUS_AREA, MSE_CSV_HEADER,
                                     TV_CSV_HEADER, eps_for, k_for,
                                     run_manifest, write_lines)


def test_annulus_geometry_and_mass_balance():
    assert ANNULUS_AREA == pytest.approx(0.1 * math.pi)
    low = sampling_model("lowtube")
    high = sampling_model("hightube")
    assert low.outside_density == pytest.approx(1.32294, abs=1e-5)
    assert high.outside_density == pytest.approx(0.908387, abs=1e-6)
    # Total mass 1: the density is piecewise constant, so integrate each piece.
    for model in (sampling_model("uniform"), low, high):
        mass = (model.annulus_mass
                + model.density([[0.01, 0.01]])[0] * (1.0 - ANNULUS_AREA))
        assert abs(mass - 1.0) <= 1e-12
        assert np.all(model.density(np.random.default_rng(0).random((100, 2))) > 0)


def test_unknown_model_rejected():
    with pytest.raises(BadConfig):
        sampling_model("midtube")


def test_sampling_empirical_annulus_mass():
    rng = np.random.default_rng(11)
    n = 200_000
    for name in ("uniform", "lowtube", "hightube"):
        model = sampling_model(name)
        pts = model.sample(n, rng)
        r = np.linalg.norm(pts - [0.5, 0.5], axis=1)
        frac = float(np.mean((r >= 0.15) & (r <= 0.35)))
        p = model.annulus_mass
        assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / n)
        assert np.all((pts > 0) & (pts < 1))


def test_sample_design_seed_handling():
    model = sampling_model("lowtube")
    a = sample_design(model, 500, 3)
    b = sample_design(model, 500, 3)
    assert np.array_equal(a, b)
    c = sample_design(model, 500, np.random.default_rng(3))
    assert np.array_equal(a, c)


def test_f0_and_noise_sigma():
    assert f0_indicator_ball([[0.5, 0.5]])[0] == 1.0
    assert f0_indicator_ball([[0.9, 0.9]])[0] == 0.0
    uniform = sampling_model("uniform")
    assert uniform.ball_probability() == pytest.approx(math.pi / 16)
    p = math.pi / 16
    assert noise_sigma(uniform, 1.0) == pytest.approx(math.sqrt(p * (1 - p)), rel=1e-12)
    assert noise_sigma(uniform, 1.0) == pytest.approx(0.3972, abs=1e-4)
    assert noise_sigma(uniform, 4.0) == pytest.approx(noise_sigma(uniform, 1.0) / 2)
    high = sampling_model("hightube")
    expected_p = (1.2 * math.pi * (0.25 ** 2 - 0.15 ** 2)
                  + high.outside_density * math.pi * 0.15 ** 2)
    assert high.ball_probability() == pytest.approx(expected_p)
    with pytest.raises(BadConfig):
        noise_sigma(uniform, 0.0)


def test_config_round_trip_and_validation():
    config = ExperimentConfig(tv_n_grid=(100, 200), tv_repetitions=2)
    again = ExperimentConfig.from_json(config.to_json())
    assert again == config
    with pytest.raises(BadConfig):
        ExperimentConfig.from_json(json.dumps({"bogus_field": 1}))
    with pytest.raises(BadConfig):
        ExperimentConfig(tv_n_grid=(5,))
    with pytest.raises(BadConfig):
        ExperimentConfig(mse_repetitions=0)
    with pytest.raises(BadConfig):
        ExperimentConfig(eps_schedule="geometric")
    with pytest.raises(BadConfig):
        ExperimentConfig(models=("uniform", "nosuch"))


def test_graph_parameter_schedules():
    config = ExperimentConfig()
    n = 1274
    assert k_for(config, n) == int(0.7 * math.log(n) ** 1.1)
    assert eps_for(config, n) == pytest.approx(
        0.47 * math.sqrt(math.log(n) ** 1.1 / n))
    plain = ExperimentConfig(eps_schedule="plain")
    assert eps_for(plain, n) == pytest.approx(math.sqrt(math.log(n) / n))


SMALL_TV = dict(tv_n_grid=(100, 250), tv_repetitions=2, models=("uniform", "lowtube"))


def test_tv_sweep_schema_and_reference_column():
    lines = tv_estimation_sweep(ExperimentConfig(**SMALL_TV))
    assert lines[0] == TV_CSV_HEADER
    rows = [dict(zip(TV_CSV_HEADER.split(","), l.split(","))) for l in lines[1:]]
    assert len(rows) == 2 * 2 * 2 * 3  # models x n x reps x graphs
    from voronoigram import limit_prediction
    for row in rows:
        assert row["model"] in ("uniform", "lowtube")
        assert float(row["dtv"]) >= 0
        if row["graph"] == "voronoi":
            assert float(row["reference"]) == pytest.approx(2.0, rel=1e-8)
        elif row["graph"] == "eps":
            p = sampling_model(row["model"]).density_on_signal_boundary()
            assert float(row["reference"]) == pytest.approx(
                limit_prediction("eps", 0.25, p), rel=1e-10)
        else:
            assert row["reference"] == ""


def test_tv_sweep_deterministic_and_thread_invariant():
    base = tv_estimation_sweep(ExperimentConfig(**SMALL_TV))
    again = tv_estimation_sweep(ExperimentConfig(**SMALL_TV))
    threaded = tv_estimation_sweep(ExperimentConfig(**SMALL_TV, threads=2))
    assert base == again == threaded


def test_mse_sweep_schema():
    config = ExperimentConfig(models=("uniform",), mse_n=120, mse_repetitions=1,
                              lambda_grid_size=4, compute_l2p=True,
                              mc_samples=2000)
    lines = mse_sweep(config)
    assert lines[0] == MSE_CSV_HEADER
    rows = [dict(zip(MSE_CSV_HEADER.split(","), l.split(","))) for l in lines[1:]]
    assert len(rows) == 4 * 4  # estimators x lambda grid
    for row in rows:
        assert row["estimator"] in ("voronoi", "voronoi-unit", "eps", "knn")
        assert 1 <= int(row["df"]) <= 120
        assert float(row["l2pn"]) >= 0
        assert float(row["l2p_se"]) > 0
    # df decreases as lambda grows, per estimator.
    for est in ("voronoi", "voronoi-unit"):
        sub = sorted((float(r["lambda"]), int(r["df"])) for r in rows
                     if r["estimator"] == est)
        assert sub[0][1] >= sub[-1][1]


def test_run_manifest_and_write_lines(tmp_path):
    config = ExperimentConfig(**SMALL_TV)
    manifest = json.loads(run_manifest(config, "sweep-tv"))
    assert manifest["command"] == "sweep-tv"
    assert manifest["config"]["seed"] == config.seed
    assert manifest["constants"]["c_d"] == pytest.approx(4 / math.pi, rel=1e-8)
    assert len(manifest["config_sha256"]) == 64
    path = tmp_path / "out" / "rows.csv"
    write_lines(["a,b", "1,2"], path)
    assert path.read_text() == "a,b\n1,2\n"


def test_render_fit_deterministic_svg(tmp_path):
    from voronoigram import RegressionDataset, fit_voronoigram

    rng = np.random.default_rng(13)
    pts = rng.random((40, 2))
    data = RegressionDataset(points=pts, y=rng.standard_normal(40))
    diagram = voronoi(pts)
    fit, fn = fit_voronoigram(data, 0.3, diagram=diagram)
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    render_fit(fn, fit, diagram, p1)
    render_fit(fn, fit, diagram, p2)
    body = p1.read_bytes()
    assert body == p2.read_bytes()
    assert b"<svg" in body
    png = tmp_path / "c.png"
    render_fit(fn, fit, diagram, png)
    assert png.stat().st_size > 0
