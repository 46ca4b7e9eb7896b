"""Pytest configuration and fixtures for Spectral Surgery Lab tests."""

import os

# Quiet logging unless a test asks for more
os.environ.setdefault("SSL_LOG_LEVEL", "WARNING")

import numpy as np
import pytest

from src.models.surface import TriSurface
from src.services.builtin_surfaces import disk, flat_torus, sphere
from src.services.fem import assemble
from src.services.metric import area_density, boundary_density
from src.services.topology import surface_from_positions
from src.utils.config import clear_settings_cache


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    """Point run directories at a temporary folder and reload settings."""
    monkeypatch.setenv("SSL_RUNS_DIR", str(tmp_path / "runs"))
    clear_settings_cache()
    yield
    clear_settings_cache()


@pytest.fixture(scope="session")
def tetrahedron() -> TriSurface:
    """Regular tetrahedron with unit edges, built from positions."""
    positions = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]
    ) / np.sqrt(8.0)
    faces = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    return surface_from_positions(faces, positions, name="tetrahedron")


@pytest.fixture(scope="session")
def sphere1() -> TriSurface:
    return sphere(1)


@pytest.fixture(scope="session")
def sphere2() -> TriSurface:
    return sphere(2)


@pytest.fixture(scope="session")
def torus8() -> TriSurface:
    return flat_torus(8)


@pytest.fixture(scope="session")
def torus16() -> TriSurface:
    return flat_torus(16)


@pytest.fixture(scope="session")
def disk8() -> TriSurface:
    return disk(8)


@pytest.fixture
def sphere2_problem(sphere2):
    """Laplace problem on the level-2 icosphere with the area measure."""
    return assemble(sphere2, area_density(sphere2))


@pytest.fixture
def disk_steklov(disk8):
    """Steklov problem on the unit disk with the boundary length measure."""
    return assemble(disk8, boundary_density(disk8), "steklov")
