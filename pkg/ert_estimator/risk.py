"""
Monte Carlo risk studies for the kernel estimator and log-log rate fitting.
"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import xxhash

from .fbp import approx_smoothed
from .models import (
    BiasVarianceRow, Criterion, EstimatorConfig, ImageGrid, RateFit, RiskRow, RiskStudyConfig,
)
from .phantom import eval_phantom, evaluate
from .services import ComputationDeclinedError, InvalidArgumentError, ParallelRunner, resolve_runner
from .stochastic import (
    bandwidth_mise, bandwidth_mse, estimator_eval, estimator_grid, observe, sample_design,
)

logger = logging.getLogger(__name__)


def trial_seed(master_seed: int, n: int, trial: int) -> int:
    """64-bit seed of one trial, derived from (master_seed, n, trial) only."""
    return xxhash.xxh64_intdigest(f"{master_seed}:{n}:{trial}".encode())


def theory_slope(beta: float, criterion: Criterion) -> float:
    """Exponent of the squared minimax rate in n."""
    if criterion == Criterion.MSE:
        return -(2.0 * beta - 2.0) / (2.0 * beta + 1.0)
    return -2.0 * beta / (2.0 * beta + 3.0)


def _estimator_config(cfg: RiskStudyConfig, rho: float) -> EstimatorConfig:
    if cfg.mu != 0.0 and abs(cfg.mu) >= 1.0 / rho:
        raise InvalidArgumentError(f"bandwidth {rho:.6g} violates |mu| < 1/rho for mu={cfg.mu}")
    return EstimatorConfig(mu=cfg.mu, rho_n=rho, beta=cfg.beta, alpha=cfg.alpha)


def _point_trials(cfg: RiskStudyConfig, est: EstimatorConfig, n: int, runner: ParallelRunner) -> np.ndarray:
    def trial(t: int) -> float:
        seed = trial_seed(cfg.master_seed, n, t)
        obs = observe(cfg.phantom, sample_design(n, seed), cfg.mu, cfg.noise, seed)
        return estimator_eval(obs, est, cfg.x0)

    return np.array(runner.map_ordered(trial, range(cfg.trials)))


def run_mse_study(cfg: RiskStudyConfig, runner: Optional[ParallelRunner] = None) -> List[RiskRow]:
    """Pointwise risk E (f_n*(x0) - f(x0))^2 along cfg.n_values."""
    if cfg.criterion != Criterion.MSE:
        raise InvalidArgumentError("run_mse_study requires criterion 'mse'")
    runner = resolve_runner(runner)
    truth = eval_phantom(cfg.phantom, cfg.x0)

    rows = []
    for n in cfg.n_values:
        rho = bandwidth_mse(n, cfg.beta, cfg.alpha)
        estimates = _point_trials(cfg, _estimator_config(cfg, rho), n, runner)
        errors = (estimates - truth) ** 2
        row = RiskRow(
            n=n,
            rho_n=rho,
            risk=float(np.mean(errors)),
            stderr=float(np.std(errors, ddof=1) / math.sqrt(cfg.trials)),
            bias_sq=float((np.mean(estimates) - truth) ** 2),
            variance=float(np.var(estimates)),
        )
        logger.info(f"MSE study n={n} rho={rho:.4g}: risk={row.risk:.4g} +/- {row.stderr:.2g}")
        rows.append(row)
    return rows


def run_mise_study(cfg: RiskStudyConfig, runner: Optional[ParallelRunner] = None) -> List[RiskRow]:
    """Integrated risk over the pixels of an n_side grid that lie in the unit ball."""
    if cfg.criterion != Criterion.MISE:
        raise InvalidArgumentError("run_mise_study requires criterion 'mise'")
    runner = resolve_runner(runner)
    grid = ImageGrid.zeros(cfg.n_side)
    mask = grid.unit_ball_mask()
    xs, ys = grid.mesh()
    truth = evaluate(cfg.phantom, xs[mask], ys[mask])
    area = grid.pixel_area

    rows = []
    for n in cfg.n_values:
        rho = bandwidth_mise(n, cfg.beta, cfg.alpha)
        est = _estimator_config(cfg, rho)

        def trial(t: int) -> np.ndarray:
            seed = trial_seed(cfg.master_seed, n, t)
            obs = observe(cfg.phantom, sample_design(n, seed), cfg.mu, cfg.noise, seed)
            return estimator_grid(obs, est, cfg.n_side).values[mask]

        images = np.vstack(runner.map_ordered(trial, range(cfg.trials)))
        errors = np.sum((images - truth) ** 2, axis=1) * area
        mean_image = np.mean(images, axis=0)
        row = RiskRow(
            n=n,
            rho_n=rho,
            risk=float(np.mean(errors)),
            stderr=float(np.std(errors, ddof=1) / math.sqrt(cfg.trials)),
            bias_sq=float(np.sum((mean_image - truth) ** 2) * area),
            variance=float(np.sum(np.var(images, axis=0)) * area),
        )
        logger.info(f"MISE study n={n} rho={rho:.4g}: risk={row.risk:.4g} +/- {row.stderr:.2g}")
        rows.append(row)
    return rows


def run_study(cfg: RiskStudyConfig, runner: Optional[ParallelRunner] = None) -> List[RiskRow]:
    if cfg.criterion == Criterion.MSE:
        return run_mse_study(cfg, runner)
    return run_mise_study(cfg, runner)


def fit_rate(rows: Sequence[RiskRow], theory_slope: float) -> RateFit:
    """Least squares of ln(risk) on ln(n)."""
    if len(rows) < 3:
        raise InvalidArgumentError(f"need at least 3 rows to fit a rate, got {len(rows)}")
    risks = np.array([row.risk for row in rows])
    if np.any(risks <= 0):
        raise ComputationDeclinedError("cannot fit a rate to nonpositive risks")

    log_n = np.log([row.n for row in rows])
    log_risk = np.log(risks)
    slope, intercept = np.polyfit(log_n, log_risk, 1)
    residual = log_risk - (slope * log_n + intercept)
    total = np.sum((log_risk - log_risk.mean()) ** 2)
    r_squared = 1.0 if total == 0 else 1.0 - np.sum(residual ** 2) / total
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(min(max(r_squared, 0.0), 1.0)),
        theory_slope=theory_slope,
    )


def bias_variance_profile(
    cfg: RiskStudyConfig,
    rho_values: Sequence[float],
    n: int,
    runner: Optional[ParallelRunner] = None,
) -> List[BiasVarianceRow]:
    """Bias and variance of f_n*(x0) at fixed n across bandwidths.

    The squared bias is the deterministic (f_rho(x0) - f(x0))^2; the Monte
    Carlo departure of the trial mean from f_rho(x0) is reported separately.
    """
    if any(rho <= 0 for rho in rho_values):
        raise InvalidArgumentError("bandwidths must be positive")
    runner = resolve_runner(runner)
    truth = eval_phantom(cfg.phantom, cfg.x0)

    rows = []
    for rho in rho_values:
        smoothed = approx_smoothed(cfg.phantom, rho, cfg.x0)
        estimates = _point_trials(cfg, _estimator_config(cfg, rho), n, runner)
        variance = float(np.var(estimates, ddof=1))
        rows.append(BiasVarianceRow(
            rho=rho,
            bias_sq=(smoothed - truth) ** 2,
            variance=variance,
            variance_stderr=variance * math.sqrt(2.0 / (cfg.trials - 1)),
            sampling_bias=float(np.mean(estimates) - smoothed),
            sampling_stderr=float(np.std(estimates, ddof=1) / math.sqrt(cfg.trials)),
        ))
        logger.debug(f"Profile rho={rho}: bias_sq={rows[-1].bias_sq:.4g} variance={variance:.4g}")
    return rows


__all__ = [
    'trial_seed', 'theory_slope', 'run_mse_study', 'run_mise_study', 'run_study',
    'fit_rate', 'bias_variance_profile',
]
