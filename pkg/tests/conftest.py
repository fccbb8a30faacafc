import os
import tempfile
from pathlib import Path

# keep test runs out of the project log directory
os.environ.setdefault("LANDSCAPE_LOG_FILE", str(Path(tempfile.gettempdir()) / "landscape-tests.log"))

import numpy as np
import pytest

from app.lattice import Torus
from app.operator import assemble
from app.potentials import UniformDistribution, explicit_potential, sample_anderson
from app.schema import RunConfig


@pytest.fixture
def ring():
    return Torus(d=1, K=24)


@pytest.fixture
def square():
    return Torus(d=2, K=8)


@pytest.fixture
def uniform():
    return UniformDistribution(low=0.0, high=4.0)


@pytest.fixture
def anderson_1d(ring, uniform):
    return assemble(ring, sample_anderson(ring, uniform, seed=11))


@pytest.fixture
def anderson_2d(square, uniform):
    return assemble(square, sample_anderson(square, uniform, seed=12))


@pytest.fixture
def heavy_potential():
    """Values in [4, 8]: the effective potential never drops below 4."""
    t = Torus(d=1, K=12)
    rng = np.random.default_rng(5)
    return explicit_potential(t, 4.0 + 4.0 * rng.random(t.shape))


@pytest.fixture
def make_run(tmp_path):
    def factory(**sections) -> RunConfig:
        return RunConfig(output_dir=tmp_path, plot=False, **sections).with_command("landscape test")

    return factory
