"""
Command-line entry point.

Every subcommand takes its parameters from an optional JSON file given with
``--config``; flags given on the command line take precedence over it.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, FilePath, ValidationError

from .ert import forward_sinogram
from .fbp import reconstruct
from .formats import (
    load_phantom, read_risk, read_sinogram, sidecar_path, write_grid, write_observations,
    write_rate_fit, write_risk, write_sinogram, write_sinogram_csv,
)
from .models import (
    Criterion, EstimatorConfig, FilterParams, NoiseKind, NoiseModel, RiskStudyConfig,
)
from .phantom import certify_class, rasterize
from .risk import fit_rate, run_study, theory_slope
from .services import ComputationDeclinedError, ConfigurationError, ERTError, ParallelRunner
from .stochastic import bandwidth_mse, estimator_grid, observe, sample_design
from .utils import Config, format_array_summary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DECLINED = 3


# Run configurations
def _csv_with_sidecar(path: Path) -> Path:
    if path.suffix.lower() == ".json":
        raise ValueError(f"{path}: this output gets a .json sidecar, so it cannot end in .json itself")
    return path


SidecarCsvPath = Annotated[Path, AfterValidator(_csv_with_sidecar)]


class RunConfig(BaseModel):
    """Fields shared by every subcommand."""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, description="Master seed for all randomness")


class PhantomRun(RunConfig):
    phantom: FilePath
    nside: int = Field(default=128, ge=2)
    out: Path
    beta: Optional[float] = Field(default=None, gt=1)
    binary: bool = False


class SinogramRun(RunConfig):
    phantom: FilePath
    mu: float = 0.0
    ntheta: int = Field(default=360, ge=2)
    ns: int = Field(default=256, ge=2)
    out: Path
    csv: Optional[Path] = None


class FbpRun(RunConfig):
    sinogram: FilePath
    rho: float = Field(gt=0)
    nside: int = Field(default=128, ge=2)
    out: Path
    binary: bool = False


class NoiseOptions(RunConfig):
    noise: NoiseKind = NoiseKind.GAUSSIAN
    sigma: float = Field(default=0.05, ge=0)

    def noise_model(self) -> NoiseModel:
        sigma = 0.0 if self.noise == NoiseKind.NONE else self.sigma
        return NoiseModel(kind=self.noise, sigma=sigma)


class EstimateRun(NoiseOptions):
    phantom: FilePath
    n: int = Field(ge=1)
    mu: float = 0.0
    rho: Optional[float] = Field(default=None, gt=0)
    beta: float = Field(default=2.0, gt=1)
    alpha: float = Field(default_factory=lambda: Config.DEFAULT_ALPHA, gt=0)
    nside: int = Field(default=64, ge=2)
    out: Path
    observations: Optional[SidecarCsvPath] = None
    binary: bool = False


class RiskRun(NoiseOptions):
    phantom: FilePath
    criterion: Criterion = Criterion.MSE
    mu: float = 0.0
    beta: float = Field(default=2.0, gt=1)
    alpha: float = Field(default_factory=lambda: Config.DEFAULT_ALPHA, gt=0)
    n_values: List[int] = Field(min_length=1)
    trials: int = Field(default=200, ge=2)
    x0: Tuple[float, float] = (0.1, 0.2)
    nside: int = Field(default=32, ge=2)
    out: SidecarCsvPath


class RateFitRun(RunConfig):
    risk: FilePath
    beta: float = Field(default=2.0, gt=1)
    criterion: Criterion = Criterion.MSE
    out: Optional[Path] = None


# Commands
def cmd_phantom(run: PhantomRun, runner: ParallelRunner) -> int:
    phantom = load_phantom(run.phantom)
    grid = rasterize(phantom, run.nside)
    write_grid(run.out, grid, binary=run.binary)
    print(format_array_summary("phantom", grid.values))
    if run.beta is not None:
        smoothness = certify_class(phantom, run.beta)
        print(f"certified H(beta={smoothness.beta:g}, L={smoothness.big_l:.6g})")
    return EXIT_OK


def cmd_sinogram(run: SinogramRun, runner: ParallelRunner) -> int:
    phantom = load_phantom(run.phantom)
    g = forward_sinogram(phantom, run.ntheta, run.ns, run.mu, runner)
    write_sinogram(run.out, g)
    if run.csv is not None:
        write_sinogram_csv(run.csv, g)
    print(format_array_summary("sinogram", g.values))
    return EXIT_OK


def cmd_fbp(run: FbpRun, runner: ParallelRunner) -> int:
    g = read_sinogram(run.sinogram)
    image = reconstruct(g, FilterParams(rho=run.rho, mu=g.mu), run.nside, runner)
    write_grid(run.out, image, binary=run.binary)
    print(format_array_summary("reconstruction", image.values))
    return EXIT_OK


def cmd_estimate(run: EstimateRun, runner: ParallelRunner) -> int:
    phantom = load_phantom(run.phantom)
    rho = run.rho if run.rho is not None else bandwidth_mse(run.n, run.beta, run.alpha)
    cfg = EstimatorConfig(mu=run.mu, rho_n=rho, beta=run.beta, alpha=run.alpha)
    obs = observe(phantom, sample_design(run.n, run.seed), run.mu, run.noise_model(), run.seed)
    if run.observations is not None:
        write_observations(run.observations, obs)
    image = estimator_grid(obs, cfg, run.nside, runner)
    write_grid(run.out, image, binary=run.binary)
    print(format_array_summary(f"estimate (n={run.n}, rho={rho:.4g})", image.values))
    return EXIT_OK


def cmd_risk(run: RiskRun, runner: ParallelRunner) -> int:
    study = RiskStudyConfig(
        phantom=load_phantom(run.phantom),
        mu=run.mu,
        noise=run.noise_model(),
        beta=run.beta,
        alpha=run.alpha,
        n_values=run.n_values,
        trials=run.trials,
        x0=run.x0,
        n_side=run.nside,
        master_seed=run.seed,
        criterion=run.criterion,
    )
    rows = run_study(study, runner)
    write_risk(run.out, rows)
    for row in rows:
        print(f"n={row.n} rho={row.rho_n:.4g} risk={row.risk:.6g} stderr={row.stderr:.2g}")

    if len(rows) < 3:
        logger.info("Fewer than 3 sample sizes; skipping the rate fit")
        return EXIT_OK
    fit = fit_rate(rows, theory_slope(run.beta, run.criterion))
    write_rate_fit(sidecar_path(run.out), fit)
    print(f"slope={fit.slope:.4f} theory={fit.theory_slope:.4f} r_squared={fit.r_squared:.4f}")
    return EXIT_OK


def cmd_rate_fit(run: RateFitRun, runner: ParallelRunner) -> int:
    fit = fit_rate(read_risk(run.risk), theory_slope(run.beta, run.criterion))
    if run.out is not None:
        write_rate_fit(run.out, fit)
    print(fit.model_dump_json())
    return EXIT_OK


COMMANDS: Dict[str, Tuple[type, Callable[[Any, ParallelRunner], int]]] = {
    "phantom": (PhantomRun, cmd_phantom),
    "sinogram": (SinogramRun, cmd_sinogram),
    "fbp": (FbpRun, cmd_fbp),
    "estimate": (EstimateRun, cmd_estimate),
    "risk": (RiskRun, cmd_risk),
    "rate-fit": (RateFitRun, cmd_rate_fit),
}


# Argument parsing
def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _point(text: str) -> Tuple[float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ert", description="Exponential Radon transform reconstruction and kernel estimation")
    parser.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        sub.add_argument("--config", type=Path, help="JSON file with parameters for this command")
        sub.add_argument("--seed", type=int, help="Master seed")
        sub.add_argument("--threads", type=int, help="Worker count (default: ERT_THREADS or CPU count)")
        return sub

    sub = command("phantom", "Rasterize a phantom JSON to a grid file")
    sub.add_argument("--phantom", type=Path)
    sub.add_argument("--nside", type=int)
    sub.add_argument("--out", type=Path)
    sub.add_argument("--beta", type=float, help="Also certify membership in H(beta, L)")
    sub.add_argument("--binary", action="store_true")

    sub = command("sinogram", "Sample the exponential Radon transform of a phantom")
    sub.add_argument("--phantom", type=Path)
    sub.add_argument("--mu", type=float)
    sub.add_argument("--ntheta", type=int)
    sub.add_argument("--ns", type=int)
    sub.add_argument("--out", type=Path)
    sub.add_argument("--csv", type=Path, help="Also export phi,s,value rows")

    sub = command("fbp", "Filtered backprojection of a sinogram file")
    sub.add_argument("--sinogram", type=Path)
    sub.add_argument("--rho", type=float)
    sub.add_argument("--nside", type=int)
    sub.add_argument("--out", type=Path)
    sub.add_argument("--binary", action="store_true")

    sub = command("estimate", "Simulate observations and evaluate the kernel estimator on a grid")
    sub.add_argument("--phantom", type=Path)
    sub.add_argument("--n", type=int)
    sub.add_argument("--mu", type=float)
    sub.add_argument("--noise", choices=[k.value for k in NoiseKind])
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--rho", type=float, help="Bandwidth (default: alpha n^(-1/(2 beta + 1)))")
    sub.add_argument("--beta", type=float)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--nside", type=int)
    sub.add_argument("--out", type=Path)
    sub.add_argument("--observations", type=Path, help="Also write the observation CSV and sidecar")
    sub.add_argument("--binary", action="store_true")

    sub = command("risk", "Monte Carlo MSE or MISE study with a rate fit")
    sub.add_argument("--phantom", type=Path)
    sub.add_argument("--criterion", choices=[c.value for c in Criterion])
    sub.add_argument("--mu", type=float)
    sub.add_argument("--noise", choices=[k.value for k in NoiseKind])
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--beta", type=float)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--n-values", dest="n_values", type=_int_list, help="Comma-separated sample sizes")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--x0", type=_point, help="Evaluation point 'x,y' for the mse criterion")
    sub.add_argument("--nside", type=int)
    sub.add_argument("--out", type=Path)

    sub = command("rate-fit", "Fit the log-log slope of a risk CSV")
    sub.add_argument("--risk", type=Path)
    sub.add_argument("--beta", type=float)
    sub.add_argument("--criterion", choices=[c.value for c in Criterion])
    sub.add_argument("--out", type=Path)
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON config file with the flags; flags win."""
    model, _ = COMMANDS[args.command]
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "threads", "log_level")}
    values: Dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"{config_path}: expected a JSON object")
        values.update(loaded)
    values.update(flags)
    return model.model_validate(values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.log_level:
        logging.getLogger().setLevel(args.log_level.upper())

    try:
        run = load_run_config(args)
        runner = ParallelRunner(getattr(args, "threads", None))
        _, handler = COMMANDS[args.command]
        return handler(run, runner)
    except ComputationDeclinedError as e:
        logger.error(f"{args.command}: {e}")
        print(f"ert {args.command}: declined: {e}", file=sys.stderr)
        return EXIT_DECLINED
    except (ERTError, ValidationError, ValueError, OSError) as e:
        logger.error(f"{args.command}: {e}")
        print(f"ert {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


__all__ = [
    'main', 'build_parser', 'load_run_config', 'RunConfig', 'PhantomRun', 'SinogramRun',
    'FbpRun', 'EstimateRun', 'RiskRun', 'RateFitRun',
]
