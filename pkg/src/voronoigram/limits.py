"""Numerical evaluation of the asymptotic TV-limit constants and kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DivergentIntegral, UnsupportedDescriptor


def unit_sphere_measure(m: int) -> float:
    """Hausdorff measure of the m-dimensional unit sphere: 2 pi^{(m+1)/2} / Gamma((m+1)/2)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return 2.0 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)


def unit_ball_volume(d: int) -> float:
    """Lebesgue measure of the unit d-ball: pi^{d/2} / Gamma(d/2 + 1)."""
    if d < 1:
        raise ValueError("d must be at least 1")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _kernel_cutoff(d: int) -> float:
    # exp(-omega_d r^d) < 1e-18 beyond this radius
    return (41.5 / unit_ball_volume(d)) ** (1.0 / d)


def voronoi_kernel(t: float, d: int = 2) -> float:
    """Effective facet-measure kernel: int_0^inf exp(-omega_d (t^2/4 + s^2)^{d/2}) s^{d-2} ds."""
    if d < 2:
        raise ValueError("d must be at least 2")
    if t < 0:
        raise ValueError("t must be nonnegative")
    omega = unit_ball_volume(d)
    cutoff = _kernel_cutoff(d)
    if t * t / 4.0 >= cutoff * cutoff:
        return 0.0
    upper = math.sqrt(max(cutoff * cutoff - t * t / 4.0, 0.0))

    def integrand(s):
        return math.exp(-omega * (t * t / 4.0 + s * s) ** (d / 2.0)) * s ** (d - 2)

    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def voronoi_limit_constant(d: int = 2, epsabs: float = 1e-13, epsrel: float = 1e-11):
    """The density-free limit constant of the Voronoi-graph TV functional.

    c_d = eta_{d-2}^2 / (d-1) * double integral of
    t^d s^{d-2} exp(-omega_d (t^2/4 + s^2)^{d/2}).
    Returns (value, error_estimate).
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    eta = unit_sphere_measure(d - 2)
    cutoff = 2.0 * _kernel_cutoff(d)

    def inner(t):
        return t ** d * voronoi_kernel(t, d)

    val, err = integrate.quad(inner, 0.0, cutoff, epsabs=epsabs, epsrel=epsrel, limit=400)
    scale = eta * eta / (d - 1)
    return scale * val, scale * err


def surface_tension(kernel, d: int = 2, support: float = None):
    """sigma_K = 2 eta_{d-2} / (d-1) * int_0^inf K(t) t^d dt; returns (value, error).

    ``support`` optionally bounds the kernel support; otherwise the tail is
    integrated over growing panels and checked for geometric decay.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    scale = 2.0 * unit_sphere_measure(d - 2) / (d - 1)

    def integrand(t):
        return kernel(t) * t ** d

    if support is not None:
        val, err = integrate.quad(integrand, 0.0, support, epsabs=1e-13, epsrel=1e-11,
                                  limit=400)
        return scale * val, scale * err

    edges = [0.0, 1.0, 10.0, 100.0, 1000.0]
    panels = []
    total = err_total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=400)
        panels.append(abs(v))
        total += v
        err_total += e
    # Tail test: panel mass must be collapsing by the last decade.
    if panels[-1] > 1e-12 * max(panels[0], 1e-300) and panels[-1] >= panels[-2] / 10:
        raise DivergentIntegral("kernel tail does not decay against t^d")
    return scale * total, scale * err_total


@dataclass(frozen=True)
class LimitConstants:
    d: int
    eta: float  # H^{d-2}(S^{d-2})
    leb: float  # volume of the unit d-ball
    c_d: float
    c_d_error: float
    sigma_eps: float  # epsilon-graph constant: sigma_K / 2 for K = 1{t <= 1}
    sigma_eps_error: float


def limit_constants(d: int = 2) -> LimitConstants:
    c, c_err = voronoi_limit_constant(d)
    sig, sig_err = surface_tension(lambda t: 1.0, d, support=1.0)
    return LimitConstants(d=d, eta=unit_sphere_measure(d - 2), leb=unit_ball_volume(d),
                          c_d=c, c_d_error=c_err,
                          sigma_eps=sig / 2.0, sigma_eps_error=sig_err / 2.0)


def ball_perimeter(r: float) -> float:
    return 2.0 * math.pi * r


def limit_prediction(graph_kind: str, ball_radius: float, density_on_boundary: float,
                     d: int = 2) -> float:
    """Predicted limit of the (rescaled) discrete TV for a ball-indicator signal.

    graph_kind: "voronoi" (density-free, c_d * perimeter), "eps"
    ((sigma_K/2) * perimeter * p^2 on the boundary circle).  The kNN constant
    has no closed form and is not predicted here.
    """
    if d != 2:
        raise UnsupportedDescriptor("closed-form predictions implemented for d = 2 only")
    perimeter = ball_perimeter(ball_radius)
    if graph_kind == "voronoi":
        return voronoi_limit_constant(d)[0] * perimeter
    if graph_kind == "eps":
        sig = surface_tension(lambda t: 1.0, d, support=1.0)[0]
        return (sig / 2.0) * perimeter * density_on_boundary ** 2
    raise UnsupportedDescriptor(f"no closed-form limit for graph kind {graph_kind!r}")
