"""
Data models for the ERT estimator.

Configuration-like records are pydantic models; array-backed values (grids,
sinograms, observation sets) are frozen dataclasses validated on construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Annotated, List, Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .services import InvalidArgumentError

TWO_PI = 2.0 * math.pi

# Slack for floating-point round-off in support checks
_SUPPORT_TOL = 1e-12


# Function class and phantoms
class SmoothnessClass(BaseModel):
    """The class H(beta, L): unit-ball support with bounded Sobolev-weighted Fourier energy."""
    model_config = ConfigDict(frozen=True)

    beta: float = Field(gt=1, description="Sobolev exponent")
    big_l: float = Field(gt=0, description="Bound L on the weighted Fourier energy")


class Disk(BaseModel):
    """Constant-valued disk. Only used as a forward-transform oracle."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["disk"] = "disk"
    center: Tuple[float, float] = Field(description="Disk center in the plane")
    radius: float = Field(gt=0, description="Disk radius")
    amplitude: float = Field(description="Value inside the disk")

    @model_validator(mode="after")
    def _inside_unit_ball(self) -> "Disk":
        if math.hypot(*self.center) + self.radius > 1.0 + _SUPPORT_TOL:
            raise ValueError("disk must lie inside the closed unit ball")
        return self


class Bump(BaseModel):
    """Smooth bump amplitude * exp(1 - 1/(1 - r^2)), r = |x - center| / scale."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["bump"] = "bump"
    center: Tuple[float, float] = Field(description="Bump center in the plane")
    scale: float = Field(gt=0, description="Support radius of the bump")
    amplitude: float = Field(description="Value at the center")

    @model_validator(mode="after")
    def _inside_unit_ball(self) -> "Bump":
        if math.hypot(*self.center) + self.scale > 1.0 + _SUPPORT_TOL:
            raise ValueError("bump must lie inside the closed unit ball")
        return self


PhantomComponent = Annotated[Union[Disk, Bump], Field(discriminator="kind")]


class Phantom(BaseModel):
    """Sum of disks and bumps supported in the unit ball."""
    model_config = ConfigDict(frozen=True)

    components: Tuple[PhantomComponent, ...] = Field(default=(), description="Disks and bumps")

    @property
    def has_disks(self) -> bool:
        return any(isinstance(c, Disk) for c in self.components)


# Discretizations
@dataclass(frozen=True)
class ImageGrid:
    """Samples on a uniform n_side x n_side grid of pixel centers covering [-1, 1]^2.

    ``values[j, k]`` is the sample at x = centers[j], y = centers[k]; flattening
    is row-major.
    """
    n_side: int
    values: np.ndarray

    def __post_init__(self):
        if int(self.n_side) < 2:
            raise InvalidArgumentError(f"n_side must be >= 2, got {self.n_side}")
        values = np.array(self.values, dtype=float)
        if values.size != self.n_side ** 2:
            raise InvalidArgumentError(
                f"expected {self.n_side ** 2} values for n_side={self.n_side}, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("image values must be finite")
        values = values.reshape(self.n_side, self.n_side)
        values.setflags(write=False)
        object.__setattr__(self, "n_side", int(self.n_side))
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n_side: int) -> "ImageGrid":
        return cls(n_side=n_side, values=np.zeros((n_side, n_side)))

    @property
    def pixel_size(self) -> float:
        return 2.0 / self.n_side

    @property
    def pixel_area(self) -> float:
        return self.pixel_size ** 2

    @cached_property
    def centers(self) -> np.ndarray:
        return -1.0 + (np.arange(self.n_side) + 0.5) * self.pixel_size

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates X[j, k], Y[j, k]."""
        return np.meshgrid(self.centers, self.centers, indexing="ij")

    def unit_ball_mask(self) -> np.ndarray:
        xs, ys = self.mesh()
        return xs ** 2 + ys ** 2 <= 1.0


@dataclass(frozen=True)
class Sinogram:
    """Samples of a function on Z = S^1 x [-1, 1].

    Angles are phi_j = 2*pi*j / n_theta and offsets are the centers of n_s equal
    subintervals of [-1, 1]; ``values[j, k]`` is the sample at (phi_j, s_k).
    """
    n_theta: int
    n_s: int
    values: np.ndarray
    mu: float

    def __post_init__(self):
        if int(self.n_theta) < 2 or int(self.n_s) < 2:
            raise InvalidArgumentError(f"n_theta and n_s must be >= 2, got {self.n_theta}, {self.n_s}")
        values = np.array(self.values, dtype=float)
        if values.size != self.n_theta * self.n_s:
            raise InvalidArgumentError(
                f"expected {self.n_theta} x {self.n_s} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("sinogram values must be finite")
        values = values.reshape(self.n_theta, self.n_s)
        values.setflags(write=False)
        object.__setattr__(self, "n_theta", int(self.n_theta))
        object.__setattr__(self, "n_s", int(self.n_s))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def zeros(cls, n_theta: int, n_s: int, mu: float) -> "Sinogram":
        return cls(n_theta=n_theta, n_s=n_s, values=np.zeros((n_theta, n_s)), mu=mu)

    @property
    def ds(self) -> float:
        return 2.0 / self.n_s

    @property
    def dphi(self) -> float:
        return TWO_PI / self.n_theta

    @cached_property
    def phis(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_theta) / self.n_theta

    @cached_property
    def s_nodes(self) -> np.ndarray:
        return -1.0 + (np.arange(self.n_s) + 0.5) * self.ds

    def with_values(self, values: np.ndarray) -> "Sinogram":
        return Sinogram(n_theta=self.n_theta, n_s=self.n_s, values=values, mu=self.mu)


# Rays and designs
class Ray(BaseModel):
    """Line {x : x.theta = s} with theta = (cos phi, sin phi)."""
    model_config = ConfigDict(frozen=True)

    phi: float = Field(ge=0, lt=TWO_PI, description="Angle of theta in radians")
    s: float = Field(ge=-1, le=1, description="Signed line offset")


@dataclass(frozen=True)
class RayBatch:
    """A design: n rays stored column-wise."""
    phi: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float).ravel()
        s = np.array(self.s, dtype=float).ravel()
        if phi.shape != s.shape:
            raise InvalidArgumentError("phi and s must have equal lengths")
        if np.any(np.abs(s) > 1.0):
            raise InvalidArgumentError("ray offsets must lie in [-1, 1]")
        phi.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_rays(cls, rays: Sequence[Ray]) -> "RayBatch":
        return cls(phi=[r.phi for r in rays], s=[r.s for r in rays])

    def __len__(self) -> int:
        return int(self.phi.size)

    def __getitem__(self, index: int) -> Ray:
        return Ray(phi=float(self.phi[index]), s=float(self.s[index]))

    @cached_property
    def cos_phi(self) -> np.ndarray:
        return np.cos(self.phi)

    @cached_property
    def sin_phi(self) -> np.ndarray:
        return np.sin(self.phi)


# Noise and observations
class NoiseKind(str, Enum):
    """Supported noise distributions."""
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    NONE = "none"


class NoiseModel(BaseModel):
    """Zero-mean i.i.d. noise with standard deviation sigma.

    For uniform noise the half-width is sigma * sqrt(3).
    """
    model_config = ConfigDict(frozen=True)

    kind: NoiseKind = Field(default=NoiseKind.GAUSSIAN, description="Noise distribution")
    sigma: float = Field(default=0.0, ge=0, description="Standard deviation")

    @model_validator(mode="after")
    def _check_sigma(self) -> "NoiseModel":
        if self.kind == NoiseKind.NONE and self.sigma != 0.0:
            raise ValueError("noise kind 'none' requires sigma = 0")
        if self.kind != NoiseKind.NONE and not self.sigma > 0.0:
            raise ValueError(f"noise kind '{self.kind.value}' requires sigma > 0")
        return self

    @property
    def variance(self) -> float:
        return self.sigma ** 2

    @property
    def half_width(self) -> float:
        return self.sigma * math.sqrt(3.0)

    @property
    def i0(self) -> float:
        """Constant of the Kullback bound KL <= i0 * v^2 (infinite when no such bound exists)."""
        if self.kind == NoiseKind.GAUSSIAN:
            return 1.0 / (2.0 * self.sigma ** 2)
        return math.inf

    @property
    def v0(self) -> float:
        """Range |v| <= v0 on which the Kullback bound holds."""
        return math.inf if self.kind == NoiseKind.GAUSSIAN else 0.0


@dataclass(frozen=True)
class ObservationSet:
    """Noisy random-design samples Y_i = T_mu f(theta_i, s_i) + eps_i."""
    rays: RayBatch
    y: np.ndarray
    mu: float
    seed: int
    noise: NoiseModel

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        if y.size != len(self.rays):
            raise InvalidArgumentError(f"{len(self.rays)} rays but {y.size} observations")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def n(self) -> int:
        return int(self.y.size)


# Filter and estimator configuration
class FilterParams(BaseModel):
    """Bandwidth rho and attenuation mu of the reconstruction kernel K_rho."""
    model_config = ConfigDict(frozen=True)

    rho: float = Field(gt=0, description="Bandwidth")
    mu: float = Field(default=0.0, description="Attenuation constant")

    @model_validator(mode="after")
    def _check_band(self) -> "FilterParams":
        if self.mu != 0.0 and not abs(self.mu) < 1.0 / self.rho:
            raise ValueError(f"need 0 < |mu| < 1/rho, got mu={self.mu}, rho={self.rho}")
        return self

    @property
    def band_edge(self) -> float:
        """B = sqrt(1/rho^2 + mu^2)."""
        return math.sqrt(1.0 / self.rho ** 2 + self.mu ** 2)


class EstimatorConfig(BaseModel):
    """Bandwidth and smoothness settings of the kernel estimator."""
    model_config = ConfigDict(frozen=True)

    mu: float = Field(description="Attenuation constant")
    rho_n: float = Field(gt=0, description="Bandwidth")
    beta: float = Field(default=2.0, gt=1, description="Smoothness exponent")
    alpha: float = Field(default=1.0, gt=0, description="Bandwidth prefactor")

    @property
    def filter_params(self) -> FilterParams:
        return FilterParams(rho=self.rho_n, mu=self.mu)


# Risk studies
class Criterion(str, Enum):
    """Risk criterion: pointwise (MSE) or integrated (MISE)."""
    MSE = "mse"
    MISE = "mise"


class RiskStudyConfig(BaseModel):
    """Monte Carlo risk study settings."""
    phantom: Phantom
    mu: float = 0.0
    noise: NoiseModel = Field(default_factory=lambda: NoiseModel(kind=NoiseKind.GAUSSIAN, sigma=0.05))
    beta: float = Field(default=2.0, gt=1)
    alpha: float = Field(default=1.0, gt=0)
    n_values: List[int] = Field(min_length=1)
    trials: int = Field(default=200, ge=2)
    x0: Tuple[float, float] = (0.1, 0.2)
    n_side: int = Field(default=32, ge=2)
    master_seed: int = 0
    criterion: Criterion = Criterion.MSE

    @field_validator("n_values")
    @classmethod
    def _increasing(cls, values: List[int]) -> List[int]:
        if any(n < 10 for n in values):
            raise ValueError("every n must be >= 10")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("n_values must be strictly increasing")
        return values

    @field_validator("x0")
    @classmethod
    def _in_ball(cls, x0: Tuple[float, float]) -> Tuple[float, float]:
        if math.hypot(*x0) > 1.0:
            raise ValueError("x0 must lie in the unit ball")
        return x0


class RiskRow(BaseModel):
    """One sample size of a risk study."""
    n: int
    rho_n: float
    risk: float = Field(ge=0)
    stderr: float = Field(ge=0)
    bias_sq: float = Field(ge=0)
    variance: float = Field(ge=0)


class BiasVarianceRow(BaseModel):
    """Bias and variance of the pointwise estimator at one bandwidth."""
    rho: float
    bias_sq: float = Field(ge=0, description="(f_rho(x0) - f(x0))^2")
    variance: float = Field(ge=0, description="Sample variance across trials")
    variance_stderr: float = Field(ge=0)
    sampling_bias: float = Field(description="Monte Carlo mean minus f_rho(x0)")
    sampling_stderr: float = Field(ge=0)


class RateFit(BaseModel):
    """Least-squares fit of log(risk) on log(n)."""
    slope: float
    intercept: float
    r_squared: float = Field(ge=0, le=1)
    theory_slope: float


__all__ = [
    'SmoothnessClass', 'Disk', 'Bump', 'PhantomComponent', 'Phantom',
    'ImageGrid', 'Sinogram', 'Ray', 'RayBatch',
    'NoiseKind', 'NoiseModel', 'ObservationSet',
    'FilterParams', 'EstimatorConfig',
    'Criterion', 'RiskStudyConfig', 'RiskRow', 'BiasVarianceRow', 'RateFit',
]
