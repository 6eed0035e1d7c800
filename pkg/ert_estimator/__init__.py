"""
ERT Estimator - exponential Radon transform, filtered backprojection and the
random-design kernel estimator.
"""

try:
    from .models import (
        SmoothnessClass, Disk, Bump, Phantom, ImageGrid, Sinogram, Ray, RayBatch,
        NoiseKind, NoiseModel, ObservationSet, FilterParams, EstimatorConfig,
        Criterion, RiskStudyConfig, RiskRow, RateFit,
    )
    from .ert import forward_point, forward_sinogram, dual_point
    from .filters import kernel_value, convolve_sinogram
    from .fbp import reconstruct, approx_smoothed
    from .stochastic import sample_design, observe, estimator_eval, estimator_grid
    from .risk import run_study, fit_rate
    from .services import ParallelRunner, ERTError
    from .utils import Config

    __all__ = [
        'SmoothnessClass',
        'Disk',
        'Bump',
        'Phantom',
        'ImageGrid',
        'Sinogram',
        'Ray',
        'RayBatch',
        'NoiseKind',
        'NoiseModel',
        'ObservationSet',
        'FilterParams',
        'EstimatorConfig',
        'Criterion',
        'RiskStudyConfig',
        'RiskRow',
        'RateFit',
        'forward_point',
        'forward_sinogram',
        'dual_point',
        'kernel_value',
        'convolve_sinogram',
        'reconstruct',
        'approx_smoothed',
        'sample_design',
        'observe',
        'estimator_eval',
        'estimator_grid',
        'run_study',
        'fit_rate',
        'ParallelRunner',
        'ERTError',
        'Config',
    ]
except ImportError as e:
    # Graceful degradation if imports fail
    print(f"Warning: Some ert_estimator imports failed: {e}")
    __all__ = []
