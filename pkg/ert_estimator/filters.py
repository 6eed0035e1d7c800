"""
The band-pass reconstruction kernel K_rho, its Fourier profile and discrete
convolution of sinogram rows along s.
"""
import logging
import math

import numpy as np
from scipy.linalg import toeplitz

from .models import FilterParams, Sinogram
from .services import InvalidArgumentError

logger = logging.getLogger(__name__)

# Below this |s| the closed form loses digits to cancellation in the 1/s^2 terms
SERIES_THRESHOLD = 1e-6


def kernel_value(p: FilterParams, s):
    """K_rho(s) = (1/pi) int_{|mu|}^{B} r cos(s r) dr.

    The difference cos(sB) - cos(s|mu|) is rewritten as a product of sines to
    keep full relative accuracy for moderate s. Accepts scalars or arrays.
    """
    s_arr = np.asarray(s, dtype=float)
    big_b = p.band_edge
    m = abs(p.mu)
    inv_rho_sq = 1.0 / p.rho ** 2

    small = np.abs(s_arr) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, s_arr)
    first = (big_b * np.sin(safe * big_b) - m * np.sin(safe * m)) / safe
    second = -2.0 * np.sin(0.5 * (big_b + m) * safe) * np.sin(0.5 * (big_b - m) * safe) / safe ** 2
    series = 0.5 * inv_rho_sq - s_arr ** 2 * inv_rho_sq * (inv_rho_sq + 2.0 * m * m) / 8.0
    values = np.where(small, series, first + second) / math.pi
    values = np.where(s_arr == 0.0, inv_rho_sq / (2.0 * math.pi), values)
    return float(values) if values.ndim == 0 else values


def kernel_fourier(p: FilterParams, t):
    """|t| inside the band |mu| < |t| < B, else 0."""
    t_arr = np.abs(np.asarray(t, dtype=float))
    values = np.where((t_arr > abs(p.mu)) & (t_arr < p.band_edge), t_arr, 0.0)
    return float(values) if values.ndim == 0 else values


def convolve_sinogram(g: Sinogram, p: FilterParams) -> Sinogram:
    """Direct discrete convolution of every theta-row with K_rho.

    (K * g)(theta, s_k) = ds * sum_j K(s_k - s_j) g(theta, s_j); the data are
    zero-extended outside [-1, 1].
    """
    if g.mu != p.mu:
        raise InvalidArgumentError(f"sinogram mu={g.mu} does not match filter mu={p.mu}")
    lags = kernel_value(p, g.ds * np.arange(g.n_s))
    weights = toeplitz(lags)
    logger.debug(f"Convolving {g.n_theta} rows of length {g.n_s} at rho={p.rho}")
    return g.with_values(g.ds * (g.values @ weights))


def indicator(rho: float, t):
    """I_rho(t) = 1 for |t| < 1/rho, else 0."""
    if rho <= 0:
        raise InvalidArgumentError(f"rho must be > 0, got {rho}")
    values = (np.abs(np.asarray(t, dtype=float)) < 1.0 / rho).astype(float)
    return float(values) if values.ndim == 0 else values


def indicator_gap(rho: float, t):
    """|I_rho(t) - 1|, which is 0 inside the band and 1 outside."""
    return 1.0 - indicator(rho, t)


def indicator_bounds(rho: float, t, beta: float):
    """Upper bounds (|t| rho)^beta and (2|t| rho / (1 + |t| rho))^beta on indicator_gap."""
    scaled = np.abs(np.asarray(t, dtype=float)) * rho
    return scaled ** beta, (2.0 * scaled / (1.0 + scaled)) ** beta


def kernel_l2_norm_sq(p: FilterParams, two_sided: bool = True) -> float:
    """int |K~(t)|^2 dt over the band; the one-sided value covers t > 0 only.

    By Parseval, int K(s)^2 ds is the two-sided value divided by 2 pi.
    """
    one_side = (p.band_edge ** 3 - abs(p.mu) ** 3) / 3.0
    return 2.0 * one_side if two_sided else one_side


def kernel_l2_bound(rho: float) -> float:
    """(3 + sqrt 2) / (3 rho^3), bounds the one-sided band energy whenever |mu| <= 1/rho."""
    return (3.0 + math.sqrt(2.0)) / (3.0 * rho ** 3)


__all__ = [
    'kernel_value', 'kernel_fourier', 'convolve_sinogram',
    'indicator', 'indicator_gap', 'indicator_bounds',
    'kernel_l2_norm_sq', 'kernel_l2_bound',
]
