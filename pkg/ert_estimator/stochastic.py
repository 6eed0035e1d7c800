"""
Random-design observations, the noise models and the kernel estimator f_n*.

All randomness comes from a counter-based Philox generator keyed on
(seed, stream): block i of a stream depends only on (seed, stream, i), so any
slice of a design can be regenerated independently of evaluation order.
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.special import i0, ndtri
from scipy.stats import norm

from .ert import forward_rays, sup_bound
from .filters import kernel_l2_bound, kernel_value
from .models import (
    EstimatorConfig, FilterParams, ImageGrid, NoiseKind, NoiseModel, ObservationSet, Phantom,
    RayBatch,
)
from .services import (
    InvalidArgumentError, OutOfDomainError, ParallelRunner, UnsupportedNoiseError, resolve_runner,
)

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1

# Generator streams
DESIGN_STREAM = 0
NOISE_STREAM = 1

# Kernel evaluations held in memory per estimator work item
ESTIMATOR_BLOCK = 1 << 22


def draw_uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniform [0, 1) blocks of four; row i is determined by counter start + i alone."""
    if count < 0 or start < 0:
        raise InvalidArgumentError(f"start and count must be >= 0, got {start}, {count}")
    bit_generator = np.random.Philox(key=np.array([seed & MASK64, stream], dtype=np.uint64))
    if start:
        bit_generator.advance(start)
    return np.random.Generator(bit_generator).random((count, 4))


def sample_design(n: int, seed: int) -> RayBatch:
    """n i.i.d. rays uniform on Z = S^1 x [-1, 1]."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    u = draw_uniforms(seed, DESIGN_STREAM, 0, n)
    return RayBatch(phi=2.0 * math.pi * u[:, 0], s=2.0 * u[:, 1] - 1.0)


def draw_noise(noise: NoiseModel, seed: int, n: int) -> np.ndarray:
    """n i.i.d. draws from the noise model on the noise stream."""
    if noise.kind == NoiseKind.NONE:
        return np.zeros(n)
    u = draw_uniforms(seed, NOISE_STREAM, 0, n)[:, 0]
    if noise.kind == NoiseKind.GAUSSIAN:
        return noise.sigma * ndtri(np.maximum(u, 2.0 ** -53))
    return noise.half_width * (2.0 * u - 1.0)


def observe(phantom: Phantom, rays: RayBatch, mu: float, noise: NoiseModel, seed: int) -> ObservationSet:
    """Y_i = T_mu f(theta_i, s_i) + eps_i."""
    if len(rays) == 0:
        raise InvalidArgumentError("at least one ray is required")
    clean = forward_rays(phantom, rays.phi, rays.s, mu)
    y = clean + draw_noise(noise, seed, len(rays))
    logger.debug(f"Observed {len(rays)} rays at mu={mu} with {noise.kind.value} noise")
    return ObservationSet(rays=rays, y=y, mu=mu, seed=seed, noise=noise)


def _check_config(obs: ObservationSet, cfg: EstimatorConfig) -> FilterParams:
    if cfg.mu != obs.mu:
        raise InvalidArgumentError(f"estimator mu={cfg.mu} does not match observations mu={obs.mu}")
    if cfg.mu != 0.0 and abs(cfg.mu) >= 1.0 / cfg.rho_n:
        raise InvalidArgumentError(f"need |mu| < 1/rho, got mu={cfg.mu}, rho={cfg.rho_n}")
    return cfg.filter_params


def _estimate_block(obs: ObservationSet, p: FilterParams, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    rays = obs.rays
    proj = xs[:, None] * rays.cos_phi + ys[:, None] * rays.sin_phi
    perp = -xs[:, None] * rays.sin_phi + ys[:, None] * rays.cos_phi
    terms = np.exp(-obs.mu * perp) * kernel_value(p, proj - rays.s) * obs.y
    # np.sum reduces a contiguous row pairwise, so the order is fixed per point
    return np.sum(terms, axis=1) / obs.n


def estimator_eval(obs: ObservationSet, cfg: EstimatorConfig, x: Sequence[float]) -> float:
    """f_n*(x) = (1/n) sum_i exp(-mu x.theta_i_perp) K_rho(x.theta_i - s_i) Y_i."""
    if math.hypot(x[0], x[1]) > 1.0 + 1e-12:
        raise OutOfDomainError(f"point {tuple(x)} lies outside the unit ball")
    p = _check_config(obs, cfg)
    return float(_estimate_block(obs, p, np.array([x[0]], dtype=float), np.array([x[1]], dtype=float))[0])


def estimator_values(
    obs: ObservationSet,
    cfg: EstimatorConfig,
    xs: np.ndarray,
    ys: np.ndarray,
    runner: Optional[ParallelRunner] = None,
) -> np.ndarray:
    """f_n* at many points, split into blocks of points."""
    p = _check_config(obs, cfg)
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if np.any(xs ** 2 + ys ** 2 > 1.0 + 1e-12):
        raise OutOfDomainError("estimator points must lie in the unit ball")
    block = max(1, ESTIMATOR_BLOCK // obs.n)
    chunks = [slice(start, start + block) for start in range(0, xs.size, block)]
    parts = resolve_runner(runner).map_ordered(lambda c: _estimate_block(obs, p, xs[c], ys[c]), chunks)
    return np.concatenate(parts) if parts else np.zeros(0)


def estimator_grid(
    obs: ObservationSet,
    cfg: EstimatorConfig,
    n_side: int,
    runner: Optional[ParallelRunner] = None,
) -> ImageGrid:
    """f_n* at every pixel center inside the unit ball; zero elsewhere."""
    grid = ImageGrid.zeros(n_side)
    xs, ys = grid.mesh()
    mask = grid.unit_ball_mask()
    values = np.zeros((n_side, n_side))
    values[mask] = estimator_values(obs, cfg, xs[mask], ys[mask], runner)
    return ImageGrid(n_side=n_side, values=values)


def bandwidth_mse(n: int, beta: float, alpha: float) -> float:
    """alpha * n^(-1/(2 beta + 1))."""
    _check_bandwidth_args(n, beta, alpha)
    return alpha * n ** (-1.0 / (2.0 * beta + 1.0))


def bandwidth_mise(n: int, beta: float, alpha: float) -> float:
    """alpha * n^(-1/(2 beta + 3))."""
    _check_bandwidth_args(n, beta, alpha)
    return alpha * n ** (-1.0 / (2.0 * beta + 3.0))


def _check_bandwidth_args(n: int, beta: float, alpha: float):
    if n < 1 or beta <= 1 or alpha <= 0:
        raise InvalidArgumentError(f"need n >= 1, beta > 1, alpha > 0; got {n}, {beta}, {alpha}")


def kl_gap_check(noise: NoiseModel, v: float, method: str = "analytic") -> Tuple[float, float]:
    """Kullback distance between the noise law and its shift by v, with the bound I0 v^2.

    Uniform noise has no such bound: any nonzero shift moves mass outside the
    support and both values are infinite.
    """
    if noise.kind == NoiseKind.NONE:
        raise UnsupportedNoiseError("noise kind 'none' has no density")
    bound = noise.i0 * v * v if v != 0.0 else 0.0

    if noise.kind == NoiseKind.UNIFORM:
        return (0.0 if v == 0.0 else math.inf), bound

    sigma = noise.sigma
    if method == "analytic":
        return v * v / (2.0 * sigma ** 2), bound
    if method != "quadrature":
        raise InvalidArgumentError(f"unknown method {method!r}")

    def integrand(u: float) -> float:
        return norm.pdf(u, scale=sigma) * (norm.logpdf(u, scale=sigma) - norm.logpdf(u + v, scale=sigma))

    reach = 12.0 * sigma + abs(v)
    kl, _ = quad(integrand, -reach, reach, epsabs=1e-13, epsrel=1e-12, limit=200)
    return kl, bound


def estimator_variance(
    phantom: Phantom,
    noise: NoiseModel,
    mu: float,
    rho: float,
    n: int,
    x: Sequence[float],
    n_theta: int = 720,
) -> float:
    """Exact Var f_n*(x) = (E Z^2 - (E Z)^2) / n for one summand Z, by tensor quadrature on Z."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    p = FilterParams(rho=rho, mu=mu)
    nodes, weights = np.polynomial.legendre.leggauss(max(128, int(math.ceil(24.0 / rho))))
    phis = 2.0 * math.pi * np.arange(n_theta) / n_theta
    phi_grid, s_grid = np.meshgrid(phis, nodes, indexing="ij")

    proj = x[0] * np.cos(phi_grid) + x[1] * np.sin(phi_grid)
    perp = -x[0] * np.sin(phi_grid) + x[1] * np.cos(phi_grid)
    weight = np.exp(-mu * perp) * kernel_value(p, proj - s_grid)
    data = forward_rays(phantom, phi_grid, s_grid, mu)

    cell = (2.0 * math.pi / n_theta) * weights[None, :] / (4.0 * math.pi)
    first = np.sum(cell * weight * data)
    second = np.sum(cell * weight ** 2 * (data ** 2 + noise.variance))
    return float(max(second - first ** 2, 0.0) / n)


def variance_bound(sigma: float, big_l: float, mu: float, rho: float, n: int, x: Sequence[float]) -> float:
    """Upper bound on Var f_n*(x) for f in H(beta, L) with |T_mu f| <= 2 exp(|mu|) L.

    Combines the band-energy bound on int K^2 ds with the angular factor
    2 pi I0(2 |mu| |x|).
    """
    kernel_sq = 2.0 * kernel_l2_bound(rho) / (2.0 * math.pi)
    angular = 2.0 * math.pi * float(i0(2.0 * abs(mu) * math.hypot(x[0], x[1])))
    return (sigma ** 2 + sup_bound(big_l, mu) ** 2) * kernel_sq * angular / (4.0 * math.pi * n)


def optimal_bandwidth_mse(c1: float, c3: float, beta: float, n: int) -> float:
    """Minimizer of c1^2 rho^(2 beta - 2) + c3 / (n rho^3)."""
    exponent = 1.0 / (2.0 * beta + 1.0)
    return (3.0 * c3 / (2.0 * c1 ** 2 * (beta - 1.0))) ** exponent * n ** (-exponent)


def optimal_bandwidth_mise(c2: float, c4: float, beta: float, n: int) -> float:
    """Minimizer of c2 rho^(2 beta) + c4 / (n rho^3)."""
    exponent = 1.0 / (2.0 * beta + 3.0)
    return (3.0 * c4 / (2.0 * c2 * beta)) ** exponent * n ** (-exponent)


def mse_upper_bound(c1: float, c3: float, beta: float, rho: float, n: int) -> float:
    return c1 ** 2 * rho ** (2.0 * beta - 2.0) + c3 / (n * rho ** 3)


def mise_upper_bound(c2: float, c4: float, beta: float, rho: float, n: int) -> float:
    return c2 * rho ** (2.0 * beta) + c4 / (n * rho ** 3)


__all__ = [
    'draw_uniforms', 'sample_design', 'draw_noise', 'observe',
    'estimator_eval', 'estimator_values', 'estimator_grid',
    'bandwidth_mse', 'bandwidth_mise', 'kl_gap_check',
    'estimator_variance', 'variance_bound',
    'optimal_bandwidth_mse', 'optimal_bandwidth_mise', 'mse_upper_bound', 'mise_upper_bound',
]
