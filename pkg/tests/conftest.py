"""
Shared fixtures for the ERT estimator tests.
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from ert_estimator.models import Bump, Disk, Phantom  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks (deselect with -m 'not slow')")


@pytest.fixture
def unit_bump():
    return Phantom(components=(Bump(center=(0.0, 0.0), scale=1.0, amplitude=1.0),))


@pytest.fixture
def offset_bump():
    return Phantom(components=(Bump(center=(0.1, -0.1), scale=0.4, amplitude=1.0),))


@pytest.fixture
def centered_disk():
    return Phantom(components=(Disk(center=(0.0, 0.0), radius=0.5, amplitude=1.0),))


@pytest.fixture
def shifted_disk():
    return Phantom(components=(Disk(center=(0.3, 0.0), radius=0.2, amplitude=1.0),))


@pytest.fixture
def empty_phantom():
    return Phantom()


@pytest.fixture
def phantom_file(tmp_path):
    """Write a phantom to JSON and return its path."""
    def write(phantom: Phantom, name: str = "phantom.json") -> Path:
        path = tmp_path / name
        path.write_text(phantom.model_dump_json(), encoding="utf-8")
        return path
    return write
