"""
Utilities and configuration for the ERT estimator.
"""
import os
import logging
from typing import Optional

import numpy as np
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Application configuration management."""

    # Parallelism
    THREADS: Optional[str] = os.getenv("ERT_THREADS")

    # Numerical defaults
    DEFAULT_ALPHA: float = float(os.getenv("ERT_DEFAULT_ALPHA", "1.0"))
    QUAD_EPSABS: float = float(os.getenv("ERT_QUAD_EPSABS", "1e-10"))
    PROFILE_NODES: int = int(os.getenv("ERT_PROFILE_NODES", "4097"))

    # Logging configuration
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: Optional[str] = os.getenv("LOG_FILE")

    @classmethod
    def resolve_threads(cls, requested: Optional[int] = None) -> int:
        """Worker count: explicit flag, then ERT_THREADS, then hardware parallelism."""
        if requested is not None:
            return max(1, int(requested))
        env_value = os.getenv("ERT_THREADS", cls.THREADS)
        if env_value:
            try:
                return max(1, int(env_value))
            except ValueError:
                logging.getLogger(__name__).warning(f"Ignoring malformed ERT_THREADS={env_value!r}")
        return os.cpu_count() or 1


def setup_logging(level: Optional[str] = None):
    """Set up logging configuration."""
    level_name = (level or Config.LOG_LEVEL).upper()
    log_level = getattr(logging, level_name, logging.INFO)

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        filename=Config.LOG_FILE if Config.LOG_FILE else None
    )


def format_array_summary(label: str, values: np.ndarray) -> str:
    """One-line summary (dims, min, max) of an array for CLI output."""
    values = np.asarray(values)
    if values.size == 0:
        return f"{label}: empty"
    dims = " x ".join(str(d) for d in values.shape)
    return f"{label}: dims={dims} min={values.min():.6g} max={values.max():.6g}"


__all__ = ['Config', 'setup_logging', 'format_array_summary']
