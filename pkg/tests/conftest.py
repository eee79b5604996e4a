import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hkbary.measures import DiscreteInput, ParticleMeasure

# derandomized so repeated runs exercise the same examples
settings.register_profile("repro", derandomize=True, deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repro")

FOUR_POINTS = np.array([0.0, 0.4, 0.6, 1.0])
FOUR_WEIGHTS = np.array([0.4, 0.1, 0.1, 0.4])
SIX_POINTS = np.array([0.0, 0.24, 0.45, 0.55, 0.76, 1.0])
SIX_RAW_WEIGHTS = np.array([0.3, 0.16, 0.03, 0.03, 0.16, 0.3])


@pytest.fixture
def four_mass():
    return DiscreteInput(FOUR_POINTS.reshape(-1, 1), FOUR_WEIGHTS)


@pytest.fixture
def four_mass_hellinger():
    return ParticleMeasure(FOUR_POINTS.reshape(-1, 1), FOUR_WEIGHTS ** 2)


@pytest.fixture
def six_mass():
    # the listed weights add up to 0.98; they are renormalised
    return DiscreteInput(SIX_POINTS.reshape(-1, 1), SIX_RAW_WEIGHTS / SIX_RAW_WEIGHTS.sum())
