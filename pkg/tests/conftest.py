import numpy as np
import pytest

from etchomo import Axis, BoundaryConfig, GridSpec, OrthotropicField


@pytest.fixture
def boundary_z() -> BoundaryConfig:
    return BoundaryConfig(Axis.Z, 1.0, 0.0)


def random_field(rng, nx, ny, nz, contrast=10.0, dtype=np.float64) -> OrthotropicField:
    """Log-uniform coefficients in [1/contrast, contrast], one stream per call."""
    grid = GridSpec(nx, ny, nz)
    k = np.exp(rng.uniform(-np.log(contrast), np.log(contrast), (3, grid.n_cells)))
    return OrthotropicField(grid, *(k.astype(dtype)))


def constant_field(nx, ny, nz, kx=1.0, ky=1.0, kz=1.0, lengths=(1.0, 1.0, 1.0)) -> OrthotropicField:
    grid = GridSpec(nx, ny, nz, *lengths)
    n = grid.n_cells
    return OrthotropicField(grid, np.full(n, kx), np.full(n, ky), np.full(n, kz))
