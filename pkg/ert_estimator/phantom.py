"""
Phantom evaluation, rasterization and numerical H(beta, L) membership checks.
"""
import logging
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .models import Bump, Disk, ImageGrid, Phantom, SmoothnessClass
from .services import InvalidArgumentError

logger = logging.getLogger(__name__)

# Safety factor applied to a measured Sobolev energy when certifying a class bound
CLASS_MARGIN = 1.1


def bump_profile(r: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) for r < 1, else 0; equals 1 at r = 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def component_values(component, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Values of a single disk or bump at the points (xs, ys)."""
    cx, cy = component.center
    dist = np.hypot(np.asarray(xs, dtype=float) - cx, np.asarray(ys, dtype=float) - cy)
    if isinstance(component, Disk):
        return np.where(dist <= component.radius, component.amplitude, 0.0)
    return component.amplitude * bump_profile(dist / component.scale)


def evaluate(phantom: Phantom, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized f(x); identically zero outside the unit ball."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    total = np.zeros(np.broadcast(xs, ys).shape)
    for component in phantom.components:
        total = total + component_values(component, xs, ys)
    return np.where(xs ** 2 + ys ** 2 > 1.0, 0.0, total)


def eval_phantom(phantom: Phantom, x: Sequence[float]) -> float:
    """Pointwise value f(x)."""
    return float(evaluate(phantom, np.array([x[0]]), np.array([x[1]]))[0])


def rasterize(phantom: Phantom, n_side: int) -> ImageGrid:
    """Sample the phantom at the pixel centers of an n_side x n_side grid."""
    if n_side < 2:
        raise InvalidArgumentError(f"n_side must be >= 2, got {n_side}")
    grid = ImageGrid.zeros(n_side)
    xs, ys = grid.mesh()
    return ImageGrid(n_side=n_side, values=evaluate(phantom, xs, ys))


def sobolev_weight_integral(image: ImageGrid, beta: float) -> float:
    """Discrete approximation of the integral of (1 + |xi|^2)^beta |f~(xi)|^2.

    The transform convention is f~(xi) = int f(x) exp(-i xi.x) dx, so DFT
    coefficients are scaled by the pixel area and the frequency cell is
    (2 pi / 2)^2 for the [-1, 1]^2 domain.
    """
    n_side = image.n_side
    if n_side & (n_side - 1):
        raise InvalidArgumentError(f"n_side must be a power of two, got {n_side}")
    if beta < 0:
        raise InvalidArgumentError(f"beta must be >= 0, got {beta}")

    spectrum = np.fft.fft2(image.values) * image.pixel_area
    freqs = 2.0 * np.pi * np.fft.fftfreq(n_side, d=image.pixel_size)
    xi_sq = freqs[:, None] ** 2 + freqs[None, :] ** 2
    d_xi = 2.0 * np.pi / (n_side * image.pixel_size)
    weights = (1.0 + xi_sq) ** beta
    return float(np.sum(weights * np.abs(spectrum) ** 2) * d_xi ** 2)


def certify_class(phantom: Phantom, beta: float, n_side: int = 256) -> SmoothnessClass:
    """Measure the Sobolev energy on a grid and return H(beta, L) with a 10% margin."""
    if phantom.has_disks and beta > 0.5:
        raise InvalidArgumentError("disk phantoms are not in H(beta, L) for beta > 1/2")
    measured = sobolev_weight_integral(rasterize(phantom, n_side), beta)
    logger.info(f"Measured Sobolev energy {measured:.6g} at beta={beta}, n_side={n_side}")
    return SmoothnessClass(beta=beta, big_l=max(measured, np.finfo(float).tiny) * CLASS_MARGIN)


@lru_cache(maxsize=None)
def _bump_mass() -> float:
    """Integral of the unit bump profile over the plane."""
    value, _ = quad(lambda r: bump_profile(np.array([r]))[0] * r, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * math.pi * value


def phantom_integral(phantom: Phantom) -> float:
    """Exact integral of f over the plane."""
    total = 0.0
    for component in phantom.components:
        if isinstance(component, Disk):
            total += component.amplitude * math.pi * component.radius ** 2
        elif isinstance(component, Bump):
            total += component.amplitude * component.scale ** 2 * _bump_mass()
    return total


__all__ = [
    'bump_profile', 'component_values', 'evaluate', 'eval_phantom', 'rasterize',
    'sobolev_weight_integral', 'certify_class', 'phantom_integral',
]
