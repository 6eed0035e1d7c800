"""
File formats for grids, sinograms, phantoms, observation sets and risk studies.

Numbers are written with 17 significant digits so text files round-trip
exactly and identical inputs give byte-identical files.
"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .models import ImageGrid, NoiseModel, ObservationSet, Phantom, RateFit, RayBatch, RiskRow, Sinogram
from .services import InvalidArgumentError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

GRID_MAGIC = "ERTGRID"
GRID_BINARY_MAGIC = b"ERTGRIDB"
SINO_MAGIC = "ERTSINO"
FORMAT_VERSION = "v1"
NUMBER_FORMAT = "%.17g"
RISK_COLUMNS = ("n", "rho", "risk", "stderr", "bias_sq", "variance")


def sidecar_path(path: PathLike) -> Path:
    """JSON metadata file stored next to a CSV."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        raise InvalidArgumentError(f"{path}: a .json path would collide with its own sidecar")
    return path.with_suffix(".json")


def _read_header(path: PathLike, magic: str) -> Tuple[List[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as handle:
        fields = handle.readline().split()
        if len(fields) < 3 or fields[0] != magic or fields[1] != FORMAT_VERSION:
            raise InvalidArgumentError(f"{path}: expected a '{magic} {FORMAT_VERSION}' header")
        values = np.loadtxt(handle, ndmin=1).ravel()
    return fields[2:], values


# Image grids
def write_grid(path: PathLike, grid: ImageGrid, binary: bool = False) -> None:
    if binary:
        with open(path, "wb") as handle:
            handle.write(GRID_BINARY_MAGIC)
            handle.write(np.array([grid.n_side], dtype="<u8").tobytes())
            handle.write(grid.values.astype("<f8").tobytes())
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(f"{GRID_MAGIC} {FORMAT_VERSION} {grid.n_side}\n")
            np.savetxt(handle, grid.values, fmt=NUMBER_FORMAT)
    logger.debug(f"Wrote {grid.n_side}x{grid.n_side} grid to {path}")


def read_grid(path: PathLike) -> ImageGrid:
    """Read either grid format; the binary one is recognized by its magic bytes."""
    with open(path, "rb") as handle:
        head = handle.read(len(GRID_BINARY_MAGIC))
        if head == GRID_BINARY_MAGIC:
            n_side = int(np.frombuffer(handle.read(8), dtype="<u8")[0])
            values = np.frombuffer(handle.read(), dtype="<f8")
            return ImageGrid(n_side=n_side, values=values)

    fields, values = _read_header(path, GRID_MAGIC)
    return ImageGrid(n_side=int(fields[0]), values=values)


# Sinograms
def write_sinogram(path: PathLike, g: Sinogram) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{SINO_MAGIC} {FORMAT_VERSION} {g.n_theta} {g.n_s} {NUMBER_FORMAT % g.mu}\n")
        np.savetxt(handle, g.values, fmt=NUMBER_FORMAT)


def read_sinogram(path: PathLike) -> Sinogram:
    fields, values = _read_header(path, SINO_MAGIC)
    if len(fields) != 3:
        raise InvalidArgumentError(f"{path}: sinogram header needs n_theta, n_s and mu")
    return Sinogram(n_theta=int(fields[0]), n_s=int(fields[1]), values=values, mu=float(fields[2]))


def write_sinogram_csv(path: PathLike, g: Sinogram) -> None:
    """One row per sample: phi, s, value."""
    phi, s = np.meshgrid(g.phis, g.s_nodes, indexing="ij")
    table = np.column_stack([phi.ravel(), s.ravel(), g.values.ravel()])
    np.savetxt(path, table, fmt=NUMBER_FORMAT, delimiter=",", header="phi,s,value", comments="")


# Phantoms
def load_phantom(path: PathLike) -> Phantom:
    return Phantom.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_phantom(path: PathLike, phantom: Phantom) -> None:
    Path(path).write_text(phantom.model_dump_json(indent=2), encoding="utf-8")


# Observation sets
def write_observations(path: PathLike, obs: ObservationSet) -> None:
    """CSV of (phi, s, y) plus a JSON sidecar with mu, seed, noise and n."""
    meta_path = sidecar_path(path)
    table = np.column_stack([obs.rays.phi, obs.rays.s, obs.y])
    np.savetxt(path, table, fmt=NUMBER_FORMAT, delimiter=",", header="phi,s,y", comments="")
    meta = {"mu": obs.mu, "seed": obs.seed, "noise": obs.noise.model_dump(mode="json"), "n": obs.n}
    meta_path.write_text(json.dumps(meta, indent=2), encoding="utf-8")


def read_observations(path: PathLike) -> ObservationSet:
    meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[0] != meta["n"]:
        raise InvalidArgumentError(f"{path}: sidecar says n={meta['n']}, file has {table.shape[0]} rows")
    return ObservationSet(
        rays=RayBatch(phi=table[:, 0], s=table[:, 1]),
        y=table[:, 2],
        mu=meta["mu"],
        seed=meta["seed"],
        noise=NoiseModel.model_validate(meta["noise"]),
    )


# Risk studies
def write_risk(path: PathLike, rows: Sequence[RiskRow], fit: Optional[RateFit] = None) -> None:
    """Risk table as CSV; a rate fit, when given, goes to the JSON sidecar."""
    fit_path = sidecar_path(path) if fit is not None else None
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(",".join(RISK_COLUMNS) + "\n")
        for row in rows:
            numbers = [row.rho_n, row.risk, row.stderr, row.bias_sq, row.variance]
            handle.write(",".join([str(row.n)] + [NUMBER_FORMAT % v for v in numbers]) + "\n")
    if fit is not None:
        write_rate_fit(fit_path, fit)


def read_risk(path: PathLike) -> List[RiskRow]:
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        if tuple(header) != RISK_COLUMNS:
            raise InvalidArgumentError(f"{path}: expected header {','.join(RISK_COLUMNS)}")
        table = np.loadtxt(handle, delimiter=",", ndmin=2)
    return [
        RiskRow(n=int(r[0]), rho_n=r[1], risk=r[2], stderr=r[3], bias_sq=r[4], variance=r[5])
        for r in table
    ]


def write_rate_fit(path: PathLike, fit: RateFit) -> None:
    Path(path).write_text(fit.model_dump_json(indent=2), encoding="utf-8")


__all__ = [
    'sidecar_path', 'write_grid', 'read_grid', 'write_sinogram', 'read_sinogram',
    'write_sinogram_csv', 'load_phantom', 'save_phantom', 'write_observations',
    'read_observations', 'write_risk', 'read_risk', 'write_rate_fit',
]
