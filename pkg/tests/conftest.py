import numpy as np
import pytest

from mubkit.config import get_settings
from mubkit.services.suite import reset_suite_service


@pytest.fixture(autouse=True)
def fresh_settings():
    """Every test sees settings built from its own environment and an empty suite cache."""
    get_settings.cache_clear()
    reset_suite_service()
    yield
    get_settings.cache_clear()
    reset_suite_service()


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)


@pytest.fixture
def unpatched_phase(monkeypatch):
    """The printed characteristic-2 phase, without the fourth-root repair."""
    monkeypatch.setenv("MUBKIT_PHASE_PATCH", "false")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
