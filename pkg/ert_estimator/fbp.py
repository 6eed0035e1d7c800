"""
Filtered backprojection f_rho = (1/4 pi) T#_{-mu}(K_rho * T_mu f) and the
band-limited approximate identity delta^{1/rho} it reproduces.
"""
import logging
import math
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import dblquad, quad
from scipy.special import i0, j0, j1

from .ert import dual_points
from .filters import convolve_sinogram
from .models import Disk, FilterParams, ImageGrid, Phantom, Sinogram
from .phantom import component_values
from .services import InvalidArgumentError, ParallelRunner, resolve_runner

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi

# Pixels per backprojection work item
PIXEL_CHUNK = 2048


def reconstruct(
    g: Sinogram,
    p: FilterParams,
    n_side: int,
    runner: Optional[ParallelRunner] = None,
) -> ImageGrid:
    """FBP image at the pixel centers of an n_side grid; zero outside the unit ball."""
    if p.mu != g.mu:
        raise InvalidArgumentError(f"filter mu={p.mu} does not match sinogram mu={g.mu}")
    grid = ImageGrid.zeros(n_side)
    filtered = convolve_sinogram(g, p)

    xs, ys = grid.mesh()
    mask = grid.unit_ball_mask()
    px, py = xs[mask], ys[mask]
    chunks = [slice(start, start + PIXEL_CHUNK) for start in range(0, px.size, PIXEL_CHUNK)]
    parts = resolve_runner(runner).map_ordered(
        lambda chunk: dual_points(filtered, px[chunk], py[chunk], -g.mu), chunks)

    values = np.zeros((n_side, n_side))
    if parts:
        values[mask] = np.concatenate(parts) / FOUR_PI
    logger.info(f"Reconstructed {n_side}x{n_side} image at rho={p.rho}, mu={g.mu}")
    return ImageGrid(n_side=n_side, values=values)


def approx_delta(rho: float, r):
    """delta^{1/rho}(r) = J1(r/rho) / (2 pi rho r), with value 1/(4 pi rho^2) at r = 0."""
    if rho <= 0:
        raise InvalidArgumentError(f"rho must be > 0, got {rho}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise InvalidArgumentError("radius must be >= 0")
    tiny = r_arr <= 1e-12
    safe = np.where(tiny, 1.0, r_arr)
    values = np.where(tiny, 1.0 / (FOUR_PI * rho ** 2), j1(safe / rho) / (2.0 * math.pi * rho * safe))
    return float(values) if values.ndim == 0 else values


def _unit_bump_hankel(q: float) -> float:
    """int_0^1 eta(u) J0(q u) u du."""
    def integrand(u: float) -> float:
        if u >= 1.0:
            return 0.0
        return math.exp(1.0 - 1.0 / (1.0 - u * u)) * float(j0(q * u)) * u

    value, _ = quad(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    return value


@lru_cache(maxsize=64)
def _band_nodes(rho: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1/rho]."""
    order = 64 + int(math.ceil(8.0 / rho))
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 / rho
    return half * (nodes + 1.0), half * weights


@lru_cache(maxsize=128)
def _bump_band_spectrum(scale: float, rho: float) -> np.ndarray:
    k, _ = _band_nodes(rho)
    return np.array([_unit_bump_hankel(kk * scale) for kk in k])


def _component_band_weights(component, rho: float) -> np.ndarray:
    """Hankel transform F(k) of one radial component at the band nodes."""
    k, _ = _band_nodes(rho)
    if isinstance(component, Disk):
        return 2.0 * math.pi * component.amplitude * component.radius * j1(k * component.radius) / k
    return 2.0 * math.pi * component.amplitude * component.scale ** 2 * _bump_band_spectrum(component.scale, rho)


def smoothed_values(phantom: Phantom, rho: float, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """(delta^{1/rho} * f) at many points via the radial band integral.

    Each component is radial about its center, so its smoothed value is
    (1/2 pi) int_0^{1/rho} F(k) J0(k |x - c|) k dk.
    """
    if rho <= 0:
        raise InvalidArgumentError(f"rho must be > 0, got {rho}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    k, w = _band_nodes(rho)
    total = np.zeros(np.broadcast(xs, ys).shape)
    for component in phantom.components:
        coeffs = _component_band_weights(component, rho) * w * k / (2.0 * math.pi)
        dist = np.hypot(xs - component.center[0], ys - component.center[1])
        total = total + j0(dist[..., None] * k) @ coeffs
    return total


def _smoothed_by_quadrature(phantom: Phantom, rho: float, x: Sequence[float]) -> float:
    """Literal 2-D quadrature of delta^{1/rho}(x - y) f(y), in polar coordinates about each component."""
    total = 0.0
    for component in phantom.components:
        cx, cy = component.center
        extent = component.radius if isinstance(component, Disk) else component.scale

        def integrand(psi: float, u: float) -> float:
            yx = cx + u * math.cos(psi)
            yy = cy + u * math.sin(psi)
            value = float(component_values(component, np.array([yx]), np.array([yy]))[0])
            return value * approx_delta(rho, math.hypot(x[0] - yx, x[1] - yy)) * u

        value, _ = dblquad(integrand, 0.0, extent, 0.0, 2.0 * math.pi, epsabs=1e-8, epsrel=1e-8)
        logger.debug(f"Quadrature contribution {value:.6g} from a {component.kind}")
        total += value
    return total


def approx_smoothed(phantom: Phantom, rho: float, x: Sequence[float], method: str = "hankel") -> float:
    """f_rho(x) = (delta^{1/rho} * f)(x).

    ``method="hankel"`` uses the radial band integral; ``method="quadrature"``
    integrates the convolution directly over the plane.
    """
    if rho <= 0:
        raise InvalidArgumentError(f"rho must be > 0, got {rho}")
    if method == "hankel":
        return float(smoothed_values(phantom, rho, np.array([x[0]]), np.array([x[1]]))[0])
    if method == "quadrature":
        return _smoothed_by_quadrature(phantom, rho, x)
    raise InvalidArgumentError(f"unknown method {method!r}")


def smoothed_image(phantom: Phantom, rho: float, n_side: int) -> ImageGrid:
    """approx_smoothed at every pixel center inside the unit ball, zero outside."""
    grid = ImageGrid.zeros(n_side)
    xs, ys = grid.mesh()
    mask = grid.unit_ball_mask()
    values = np.zeros((n_side, n_side))
    values[mask] = smoothed_values(phantom, rho, xs[mask], ys[mask])
    return ImageGrid(n_side=n_side, values=values)


def bessel_identity(x: Sequence[float], t: float, mu: float, n_theta: int = 720) -> Tuple[complex, float]:
    """Angular integral of exp(-mu x.theta_perp + i (x.theta) t) by the trapezoid rule,
    alongside its closed form 2 pi J0(|x| sqrt(t^2 - mu^2)).

    For |t| < |mu| the closed form continues to 2 pi I0(|x| sqrt(mu^2 - t^2)).
    """
    phis = 2.0 * math.pi * np.arange(n_theta) / n_theta
    proj = x[0] * np.cos(phis) + x[1] * np.sin(phis)
    perp = -x[0] * np.sin(phis) + x[1] * np.cos(phis)
    numeric = complex(np.sum(np.exp(-mu * perp + 1j * proj * t)) * (2.0 * math.pi / n_theta))

    r = math.hypot(x[0], x[1])
    gap = t * t - mu * mu
    if gap >= 0:
        exact = 2.0 * math.pi * float(j0(r * math.sqrt(gap)))
    else:
        exact = 2.0 * math.pi * float(i0(r * math.sqrt(-gap)))
    return numeric, exact


__all__ = [
    'reconstruct', 'approx_delta', 'approx_smoothed', 'smoothed_values',
    'smoothed_image', 'bessel_identity',
]
