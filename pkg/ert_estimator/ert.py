"""
Forward exponential Radon transform T_mu and its dual T#_mu.

Lines are parameterized as x = s*theta + t*theta_perp with theta = (cos phi, sin phi)
and theta_perp = (-sin phi, cos phi). Flipping theta_perp is equivalent to mu -> -mu,
so this orientation is used everywhere.
"""
import logging
import math
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .models import Bump, Disk, ImageGrid, Phantom, Ray, Sinogram
from .services import InvalidArgumentError, OutOfDomainError, ParallelRunner, resolve_runner
from .utils import Config

logger = logging.getLogger(__name__)

# Below this |mu * w| the sinh chord is replaced by its mu -> 0 limit
SINH_LIMIT = 1e-8


def _disk_projection(disk: Disk, cos_phi, sin_phi, s, mu: float) -> np.ndarray:
    cx, cy = disk.center
    c_theta = cx * cos_phi + cy * sin_phi
    c_perp = -cx * sin_phi + cy * cos_phi
    offset = s - c_theta
    inside = np.abs(offset) < disk.radius
    half_chord = np.sqrt(np.where(inside, disk.radius ** 2 - offset ** 2, 0.0))
    mu_w = mu * half_chord
    small = np.abs(mu_w) < SINH_LIMIT
    safe_mu = mu if mu != 0.0 else 1.0
    chord = np.where(small, 2.0 * half_chord, 2.0 * np.sinh(mu_w) / safe_mu)
    return np.where(inside, disk.amplitude * np.exp(mu * c_perp) * chord, 0.0)


def _unit_bump(r_sq: float) -> float:
    if r_sq >= 1.0:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - r_sq))


def _unit_bump_line(d: float, m: float) -> float:
    """Integral of exp(m u) * eta(sqrt(d^2 + u^2)) over the chord of the unit disk."""
    if abs(d) >= 1.0:
        return 0.0
    w = math.sqrt(1.0 - d * d)
    value, _ = quad(lambda u: math.exp(m * u) * _unit_bump(d * d + u * u), -w, w,
                    epsabs=min(Config.QUAD_EPSABS, 1e-12), epsrel=1e-12, limit=200)
    return value


@lru_cache(maxsize=128)
def bump_line_profile(mu_scaled: float) -> CubicSpline:
    """Clamped cubic spline of P(d) = int exp(mu_scaled u) eta(sqrt(d^2 + u^2)) du on d in [0, 1].

    For a bump of scale S, T_mu f(theta, s) = A exp(mu c.theta_perp) S P_{mu S}(|s - c.theta| / S).
    """
    nodes = np.linspace(0.0, 1.0, Config.PROFILE_NODES)
    values = np.array([_unit_bump_line(d, mu_scaled) for d in nodes])
    logger.debug(f"Tabulated bump line profile for mu*scale={mu_scaled} on {nodes.size} nodes")
    return CubicSpline(nodes, values, bc_type=((1, 0.0), (1, 0.0)))


def _bump_projection(bump: Bump, cos_phi, sin_phi, s, mu: float) -> np.ndarray:
    cx, cy = bump.center
    c_theta = cx * cos_phi + cy * sin_phi
    c_perp = -cx * sin_phi + cy * cos_phi
    d = np.abs(s - c_theta) / bump.scale
    inside = d < 1.0
    profile = bump_line_profile(float(mu * bump.scale))(np.where(inside, d, 1.0))
    return np.where(inside, bump.amplitude * bump.scale * np.exp(mu * c_perp) * profile, 0.0)


def _bump_projection_quad(bump: Bump, phi: float, s: float, mu: float) -> float:
    cos_phi, sin_phi = math.cos(phi), math.sin(phi)
    cx, cy = bump.center
    offset = s - (cx * cos_phi + cy * sin_phi)
    if abs(offset) >= bump.scale:
        return 0.0
    c_perp = -cx * sin_phi + cy * cos_phi
    w = math.sqrt(bump.scale ** 2 - offset ** 2)
    # The chord of the bump support always lies inside the chord of the unit disk
    inv_sq = 1.0 / bump.scale ** 2

    def integrand(t: float) -> float:
        u = t - c_perp
        return math.exp(mu * t) * _unit_bump((offset * offset + u * u) * inv_sq)

    value, _ = quad(integrand, c_perp - w, c_perp + w, epsabs=Config.QUAD_EPSABS, epsrel=1e-12, limit=200)
    return bump.amplitude * value


def forward_point(phantom: Phantom, ray: Ray, mu: float) -> float:
    """T_mu f(theta, s): disks in closed form, bumps by adaptive quadrature along the line."""
    total = 0.0
    cos_phi, sin_phi = math.cos(ray.phi), math.sin(ray.phi)
    for component in phantom.components:
        if isinstance(component, Disk):
            total += float(_disk_projection(component, cos_phi, sin_phi, ray.s, mu))
        else:
            total += _bump_projection_quad(component, ray.phi, ray.s, mu)
    return total


def forward_rays(phantom: Phantom, phi: np.ndarray, s: np.ndarray, mu: float) -> np.ndarray:
    """Vectorized T_mu f at many rays; bumps use the tabulated line profile."""
    phi = np.asarray(phi, dtype=float)
    s = np.asarray(s, dtype=float)
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    total = np.zeros(np.broadcast(phi, s).shape)
    for component in phantom.components:
        if isinstance(component, Disk):
            total = total + _disk_projection(component, cos_phi, sin_phi, s, mu)
        else:
            total = total + _bump_projection(component, cos_phi, sin_phi, s, mu)
    return total


def bilinear(image: ImageGrid, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of pixel-center samples; zero outside [-1, 1]^2."""
    h = image.pixel_size
    coords = np.stack([(np.asarray(xs) + 1.0) / h - 0.5, (np.asarray(ys) + 1.0) / h - 0.5])
    return map_coordinates(image.values, coords, order=1, mode="grid-constant", cval=0.0)


def _grid_line_integrals(image: ImageGrid, phi: float, s: np.ndarray, mu: float) -> np.ndarray:
    """Composite-midpoint line integrals at one angle, step about half a pixel."""
    s = np.asarray(s, dtype=float)
    half = np.sqrt(np.clip(1.0 - s ** 2, 0.0, None))
    steps = np.maximum(1, np.ceil(2.0 * half / (0.5 * image.pixel_size))).astype(int)
    step = 2.0 * half / steps
    index = np.arange(steps.max())
    t = -half[:, None] + (index[None, :] + 0.5) * step[:, None]
    valid = index[None, :] < steps[:, None]

    cos_phi, sin_phi = math.cos(phi), math.sin(phi)
    xs = s[:, None] * cos_phi - t * sin_phi
    ys = s[:, None] * sin_phi + t * cos_phi
    samples = bilinear(image, xs, ys)
    weights = np.where(valid, np.exp(mu * t), 0.0)
    return np.sum(weights * samples, axis=1) * step


def forward_grid_point(image: ImageGrid, ray: Ray, mu: float) -> float:
    """T_mu of a sampled image along one ray."""
    return float(_grid_line_integrals(image, ray.phi, np.array([ray.s]), mu)[0])


def forward_sinogram(
    source: Union[Phantom, ImageGrid],
    n_theta: int,
    n_s: int,
    mu: float,
    runner: Optional[ParallelRunner] = None,
) -> Sinogram:
    """Sample T_mu of a phantom or image on the uniform (phi_j, s_k) grid."""
    if n_theta < 2 or n_s < 2:
        raise InvalidArgumentError(f"n_theta and n_s must be >= 2, got {n_theta}, {n_s}")
    template = Sinogram.zeros(n_theta, n_s, mu)
    s_nodes = template.s_nodes

    if isinstance(source, Phantom):
        for component in source.components:
            if isinstance(component, Bump):
                bump_line_profile(float(mu * component.scale))

        def row(phi: float) -> np.ndarray:
            return forward_rays(source, np.full(n_s, phi), s_nodes, mu)
    elif isinstance(source, ImageGrid):
        def row(phi: float) -> np.ndarray:
            return _grid_line_integrals(source, phi, s_nodes, mu)
    else:
        raise InvalidArgumentError(f"cannot project a {type(source).__name__}")

    rows = resolve_runner(runner).map_ordered(row, template.phis)
    logger.info(f"Assembled {n_theta} x {n_s} sinogram at mu={mu}")
    return template.with_values(np.vstack(rows))


def sample_rows(g: Sinogram, rows, s: np.ndarray) -> np.ndarray:
    """Linear interpolation of sinogram rows in s.

    Between the outermost sample and |s| = 1 the end value is held; beyond
    |s| = 1 the data are zero.
    """
    s = np.asarray(s, dtype=float)
    u = (s + 1.0) / g.ds - 0.5
    lower = np.clip(np.floor(u).astype(int), 0, g.n_s - 2)
    frac = np.clip(u - lower, 0.0, 1.0)
    values = g.values[rows, lower] * (1.0 - frac) + g.values[rows, lower + 1] * frac
    return np.where(np.abs(s) <= 1.0, values, 0.0)


def dual_points(g: Sinogram, xs: np.ndarray, ys: np.ndarray, mu: float) -> np.ndarray:
    """T#_mu g at many points: trapezoid rule over the sinogram angles."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    acc = np.zeros(np.broadcast(xs, ys).shape)
    for j, phi in enumerate(g.phis):
        cos_phi, sin_phi = math.cos(phi), math.sin(phi)
        projection = xs * cos_phi + ys * sin_phi
        perp = -xs * sin_phi + ys * cos_phi
        acc += np.exp(mu * perp) * sample_rows(g, j, projection)
    return acc * g.dphi


def dual_point(g: Sinogram, x: Sequence[float], mu: float) -> float:
    """T#_mu g(x) = int_{S^1} exp(mu x.theta_perp) g(theta, x.theta) dtheta."""
    if math.hypot(x[0], x[1]) > 1.0 + 1e-12:
        raise OutOfDomainError(f"point {tuple(x)} lies outside the unit ball")
    return float(dual_points(g, np.array([x[0]]), np.array([x[1]]), mu)[0])


def sup_bound(big_l: float, mu: float) -> float:
    """A-priori bound |T_mu f| <= 2 exp(|mu|) L for f in H(beta, L)."""
    return 2.0 * math.exp(abs(mu)) * big_l


__all__ = [
    'forward_point', 'forward_rays', 'forward_grid_point', 'forward_sinogram',
    'bump_line_profile', 'bilinear', 'sample_rows', 'dual_points', 'dual_point', 'sup_bound',
]
