"""Shared fixtures."""
import numpy as np
import pytest

from ontrack.config import get_settings
from ontrack.core.optimizer import LsqProblem
from ontrack.models.configs import BackboneConfig, SynthSpec, TrackerConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch, tmp_path):
    """Isolate every test from FCOT_* variables and write logs under tmp_path."""
    for key in ("FCOT_SEED", "FCOT_WORKERS", "FCOT_DEBUG", "FCOT_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.setenv("FCOT_LOG_FILE", str(tmp_path / "logs" / "ontrack.log"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def small_cfg():
    """Tracker config with a 144 px search region (36x36 and 9x9 grids)."""
    return TrackerConfig(backbone=BackboneConfig(search_size=144, feature_channels=8))


@pytest.fixture
def short_spec():
    return SynthSpec(frames=12, canvas_height=160, canvas_width=160, target_width=32.0, target_height=24.0)


def make_problem(rng, points=40, shape=(4, 2, 3, 3), eta=0.1):
    d = shape[1] * shape[2] * shape[3]
    return LsqProblem(
        patches=rng.standard_normal((points, d)),
        targets=rng.standard_normal((points, shape[0])),
        weights=rng.uniform(0.5, 1.5, size=points),
        eta=eta,
        filter_shape=shape,
    )
