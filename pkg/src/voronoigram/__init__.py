"""Total-variation regularized regression on geometric graphs."""

__version__ = "0.1.0"

from .errors import (BadConfig, DegenerateInput, DivergentIntegral,
                     ShapeMismatch, UnsupportedDescriptor)
from .geometry import (Triangulation, VoronoiDiagram, cell_area, cell_areas,
                       delaunay, facet_length, voronoi, voronoi_facets)
from .graphs import (ClippedVoronoi, Epsilon, ExactVoronoi, Knn, UnitVoronoi,
                     WeightedGraph, build_eps_graph, build_knn_graph,
                     build_voronoi_graph, discrete_tv, incidence, load_graph,
                     save_graph)
from .solver import (SolverOptions, TvFit, df_estimate, extract_components,
                     kkt_residual, lambda_upper_bound, shrunken_average_check,
                     tv_denoise)
from .estimators import (PiecewiseConstantFn, RegressionDataset, WaveletFit,
                         continuum_tv, count_constant_regions, evaluate,
                         fit_graph_tvd, fit_voronoigram, fit_wavelet,
                         l2_p_error, l2_pn_error, lambda_theory)
from .limits import (LimitConstants, limit_constants, limit_prediction,
                     surface_tension, unit_ball_volume, unit_sphere_measure,
                     voronoi_kernel, voronoi_limit_constant)
from .experiments import (ExperimentConfig, SamplingModel, f0_indicator_ball,
                          mse_sweep, noise_sigma, render_fit, sample_design,
                          sampling_model, tv_estimation_sweep)
