import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.stats import kstest

from ert_estimator.ert import forward_point
from ert_estimator.fbp import approx_smoothed
from ert_estimator.models import (
    EstimatorConfig, NoiseKind, NoiseModel, ObservationSet, Phantom, Ray, RayBatch,
)
from ert_estimator.phantom import certify_class
from ert_estimator.services import InvalidArgumentError, OutOfDomainError, UnsupportedNoiseError
from ert_estimator.stochastic import (
    bandwidth_mise, bandwidth_mse, draw_uniforms, estimator_eval, estimator_grid, estimator_values,
    estimator_variance, kl_gap_check, mise_upper_bound, mse_upper_bound, observe,
    optimal_bandwidth_mise, optimal_bandwidth_mse, sample_design, variance_bound,
)

NO_NOISE = NoiseModel(kind=NoiseKind.NONE)
X0 = (0.1, 0.2)


def _gaussian(sigma):
    return NoiseModel(kind=NoiseKind.GAUSSIAN, sigma=sigma)


def _estimates(phantom, n, mu, noise, rho, trials, base_seed):
    cfg = EstimatorConfig(mu=mu, rho_n=rho)
    values = []
    for t in range(trials):
        seed = base_seed + t
        obs = observe(phantom, sample_design(n, seed), mu, noise, seed)
        values.append(estimator_eval(obs, cfg, X0))
    return np.array(values)


def test_design_moments():
    rays = sample_design(100_000, 42)
    assert len(rays) == 100_000
    assert abs(np.mean(rays.s)) < 0.01
    assert abs(np.mean(np.cos(rays.phi))) < 0.01
    assert np.all((rays.phi >= 0.0) & (rays.phi < 2.0 * math.pi))
    assert np.all(np.abs(rays.s) <= 1.0)


def test_design_is_reproducible():
    first = sample_design(1000, 123)
    second = sample_design(1000, 123)
    assert np.array_equal(first.phi, second.phi)
    assert np.array_equal(first.s, second.s)
    assert not np.array_equal(first.s, sample_design(1000, 124).s)


def test_design_offsets_are_uniform():
    s = sample_design(10_000, 5).s
    assert kstest(s, "uniform", args=(-1.0, 2.0)).statistic < 1.63 / math.sqrt(s.size)


def test_uniform_blocks_depend_only_on_counter():
    whole = draw_uniforms(99, 0, 0, 10)
    tail = draw_uniforms(99, 0, 5, 5)
    assert np.array_equal(whole[5:], tail)
    assert not np.array_equal(whole, draw_uniforms(99, 1, 0, 10))


def test_design_requires_rays():
    with pytest.raises(InvalidArgumentError):
        sample_design(0, 1)


def test_observe_without_noise_is_exact(offset_bump, shifted_disk):
    phantom = Phantom(components=offset_bump.components + shifted_disk.components)
    rays = sample_design(50, 8)
    obs = observe(phantom, rays, 0.7, NO_NOISE, 8)
    expected = [forward_point(phantom, rays[i], 0.7) for i in range(len(rays))]
    np.testing.assert_allclose(obs.y, expected, atol=1e-8, rtol=0)


def test_observe_accepts_a_list_of_rays(shifted_disk):
    rays = [Ray(phi=0.0, s=0.3), Ray(phi=1.2, s=-0.45), Ray(phi=3.0, s=0.95)]
    batch = RayBatch.from_rays(rays)
    assert len(batch) == 3
    assert batch[1] == rays[1]
    np.testing.assert_array_equal(batch.phi, [0.0, 1.2, 3.0])
    np.testing.assert_array_equal(batch.s, [0.3, -0.45, 0.95])

    obs = observe(shifted_disk, batch, 0.4, NO_NOISE, 5)
    np.testing.assert_allclose(obs.y, [forward_point(shifted_disk, ray, 0.4) for ray in rays], atol=1e-12, rtol=0)


def test_gaussian_noise_moments(empty_phantom):
    obs = observe(empty_phantom, sample_design(100_000, 17), 0.0, _gaussian(0.1), 17)
    assert abs(np.mean(obs.y)) < 0.001
    assert np.var(obs.y) == pytest.approx(0.01, abs=0.0005)


def test_uniform_noise_moments(empty_phantom):
    noise = NoiseModel(kind=NoiseKind.UNIFORM, sigma=0.2)
    obs = observe(empty_phantom, sample_design(100_000, 3), 0.0, noise, 3)
    assert np.max(np.abs(obs.y)) <= noise.half_width
    assert np.var(obs.y) == pytest.approx(0.04, rel=0.02)


def test_noise_is_zero_mean(shifted_disk):
    n, sigma = 100_000, 0.1
    rays = sample_design(n, 21)
    noisy = observe(shifted_disk, rays, 1.0, _gaussian(sigma), 21)
    clean = observe(shifted_disk, rays, 1.0, NO_NOISE, 21)
    assert abs(np.mean(noisy.y - clean.y)) < 3.0 * sigma / math.sqrt(n)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(kind=NoiseKind.GAUSSIAN, sigma=0.0)
    with pytest.raises(ValueError):
        NoiseModel(kind=NoiseKind.NONE, sigma=0.1)
    assert _gaussian(0.5).i0 == pytest.approx(2.0)
    assert _gaussian(0.5).v0 == math.inf


def test_estimator_of_zero_data():
    rays = sample_design(100, 1)
    obs = ObservationSet(rays=rays, y=np.zeros(100), mu=0.5, seed=1, noise=NO_NOISE)
    assert estimator_eval(obs, EstimatorConfig(mu=0.5, rho_n=0.2), X0) == 0.0


def test_estimator_single_observation():
    obs = ObservationSet(rays=RayBatch(phi=[0.0], s=[0.0]), y=[1.0], mu=0.0, seed=0, noise=NO_NOISE)
    value = estimator_eval(obs, EstimatorConfig(mu=0.0, rho_n=0.5), (0.0, 0.0))
    assert value == pytest.approx(2.0 / math.pi, rel=1e-15)
    assert value == pytest.approx(0.63662, abs=1e-5)


def test_estimator_rejects_bad_inputs(unit_bump):
    obs = observe(unit_bump, sample_design(10, 2), 0.5, NO_NOISE, 2)
    with pytest.raises(OutOfDomainError):
        estimator_eval(obs, EstimatorConfig(mu=0.5, rho_n=0.2), (0.8, 0.8))
    with pytest.raises(InvalidArgumentError):
        estimator_eval(obs, EstimatorConfig(mu=0.0, rho_n=0.2), X0)


def test_estimator_is_deterministic(unit_bump):
    cfg = EstimatorConfig(mu=0.5, rho_n=0.15)
    values = []
    for _ in range(2):
        obs = observe(unit_bump, sample_design(5000, 77), 0.5, _gaussian(0.05), 77)
        values.append(estimator_eval(obs, cfg, X0))
    assert values[0] == values[1]


def test_estimator_grid_matches_pointwise(unit_bump):
    cfg = EstimatorConfig(mu=0.5, rho_n=0.2)
    obs = observe(unit_bump, sample_design(2000, 4), 0.5, _gaussian(0.05), 4)
    grid = estimator_grid(obs, cfg, 8)
    xs, ys = grid.mesh()
    mask = grid.unit_ball_mask()
    assert np.all(grid.values[~mask] == 0.0)
    for j, k in zip(*np.nonzero(mask)):
        assert grid.values[j, k] == pytest.approx(estimator_eval(obs, cfg, (xs[j, k], ys[j, k])), abs=1e-12)

    points = estimator_values(obs, cfg, xs[mask], ys[mask])
    np.testing.assert_allclose(points, grid.values[mask], rtol=0, atol=0)


def test_bandwidth_rules():
    assert bandwidth_mse(100_000, 2.0, 1.0) == pytest.approx(0.1, rel=1e-12)
    assert bandwidth_mse(1, 3.0, 0.7) == 0.7
    assert bandwidth_mise(10_000_000, 2.0, 1.0) == pytest.approx(0.1, rel=1e-12)
    assert bandwidth_mise(1, 2.0, 0.7) == 0.7

    betas = [1.5, 2.0, 4.0, 10.0, 100.0]
    values = [bandwidth_mse(1000, beta, 1.0) for beta in betas]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] < 1.0

    for n in (2, 10, 1000, 10 ** 6):
        for beta in (1.1, 2.0, 5.0):
            assert bandwidth_mise(n, beta, 0.8) > bandwidth_mse(n, beta, 0.8)

    with pytest.raises(InvalidArgumentError):
        bandwidth_mse(0, 2.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        bandwidth_mise(10, 1.0, 1.0)


def test_kl_gap_examples():
    assert kl_gap_check(_gaussian(1.0), 0.0) == (0.0, 0.0)
    assert kl_gap_check(_gaussian(1.0), 0.5) == pytest.approx((0.125, 0.125))
    kl, bound = kl_gap_check(_gaussian(0.5), 0.2)
    assert kl == pytest.approx(0.08)
    assert kl <= bound + 1e-15


@pytest.mark.parametrize("sigma, v", [(1.0, 0.5), (0.5, 0.2), (0.05, 0.03), (2.0, -1.5)])
def test_kl_gap_quadrature_matches_closed_form(sigma, v):
    analytic, bound = kl_gap_check(_gaussian(sigma), v)
    numeric, _ = kl_gap_check(_gaussian(sigma), v, method="quadrature")
    assert numeric == pytest.approx(v * v / (2.0 * sigma ** 2), abs=1e-8)
    assert analytic == pytest.approx(bound, rel=1e-15)


def test_kl_gap_other_noise():
    uniform = NoiseModel(kind=NoiseKind.UNIFORM, sigma=0.1)
    assert kl_gap_check(uniform, 0.0) == (0.0, 0.0)
    assert kl_gap_check(uniform, 0.1) == (math.inf, math.inf)
    with pytest.raises(UnsupportedNoiseError):
        kl_gap_check(NO_NOISE, 0.1)


def test_design_is_feasible():
    n, designs = 1000, 100
    sums = []
    for seed in range(designs):
        rays = sample_design(n, seed)
        sums.append(np.sum((1.0 + np.cos(rays.phi)) * rays.s ** 2))
    sums = np.array(sums)
    stderr = np.std(sums, ddof=1) / math.sqrt(designs)
    assert abs(np.mean(sums) - n / 3.0) < 3.0 * stderr


def test_estimator_is_unbiased_for_smoothed_phantom(unit_bump):
    n, mu = 10_000, 0.5
    rho = bandwidth_mse(n, 2.0, 1.0)
    values = _estimates(unit_bump, n, mu, _gaussian(0.05), rho, 200, 1000)
    stderr = np.std(values, ddof=1) / math.sqrt(values.size)
    assert abs(np.mean(values) - approx_smoothed(unit_bump, rho, X0)) < 3.0 * stderr


def test_exact_variance_matches_simulation(unit_bump):
    n, mu, rho, sigma = 1000, 0.5, 0.2, 0.05
    values = _estimates(unit_bump, n, mu, _gaussian(sigma), rho, 400, 5000)
    exact = estimator_variance(unit_bump, _gaussian(sigma), mu, rho, n, X0)
    assert np.var(values, ddof=1) == pytest.approx(exact, rel=0.25)

    smoothness = certify_class(unit_bump, 2.0, n_side=128)
    assert exact <= variance_bound(sigma, smoothness.big_l, mu, rho, n, X0)


@pytest.mark.slow
def test_variance_scales_like_n_rho_cubed(unit_bump):
    mu, noise = 0.5, _gaussian(0.05)
    scaled = []
    for n in (1000, 10_000, 100_000):
        values = _estimates(unit_bump, n, mu, noise, 0.1, 100, 10 * n)
        scaled.append(np.var(values, ddof=1) * n * 0.1 ** 3)
    assert max(scaled) / min(scaled) < 3.0

    scaled = []
    for rho in (0.2, 0.1, 0.05):
        values = _estimates(unit_bump, 100_000, mu, noise, rho, 100, int(1e6 * rho))
        scaled.append(np.var(values, ddof=1) * 100_000 * rho ** 3)
    assert max(scaled) / min(scaled) < 3.0


def test_optimal_bandwidths_minimize_upper_bounds():
    c1, c2, c3, c4, beta, n = 1.3, 0.7, 0.02, 0.05, 2.0, 10_000

    best = minimize_scalar(lambda r: mse_upper_bound(c1, c3, beta, math.exp(r), n),
                           bounds=(-10.0, 2.0), method="bounded", options={"xatol": 1e-10})
    assert math.exp(best.x) == pytest.approx(optimal_bandwidth_mse(c1, c3, beta, n), rel=1e-4)

    best = minimize_scalar(lambda r: mise_upper_bound(c2, c4, beta, math.exp(r), n),
                           bounds=(-10.0, 2.0), method="bounded", options={"xatol": 1e-10})
    assert math.exp(best.x) == pytest.approx(optimal_bandwidth_mise(c2, c4, beta, n), rel=1e-4)
