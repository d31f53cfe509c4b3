
import numpy as np
import pytest

from energy import ActivityModel, CloudModel, FiniteRangeModel, PairwiseModel
from logger import logger
from potentials import ExponentialPotential, PowerTailPotential, StepPotential
from rng import spawn_generator


@pytest.fixture(autouse=True)
def quiet_logger():
    logger.enabled = False
    yield
    logger.enabled = True
    logger.logs = ""


@pytest.fixture
def rng() -> np.random.Generator:
    return spawn_generator(20240611)


@pytest.fixture
def power_model() -> PairwiseModel:
    return PairwiseModel(PowerTailPotential(1.0, 2.5), 1)


@pytest.fixture
def exponential_model() -> PairwiseModel:
    return PairwiseModel(ExponentialPotential(1.0, 1.0), 1)


@pytest.fixture
def cloud_model() -> CloudModel:
    return CloudModel(ExponentialPotential(1.0, 1.0), 0.5, 1)


@pytest.fixture
def strauss_model() -> FiniteRangeModel:
    return FiniteRangeModel(StepPotential(0.7, 0.5), 1)


@pytest.fixture
def zero_model() -> ActivityModel:
    return ActivityModel(0.0, 1)


def make_built_in_models(dim: int) -> list:
    models = [
        PairwiseModel(PowerTailPotential(1.0, dim + 1.5), dim),
        PairwiseModel(ExponentialPotential(0.5, 2.0, 0.05), dim),
        FiniteRangeModel(StepPotential(0.7, 0.3), dim),
        ActivityModel(0.4, dim),
        ActivityModel(-0.3, dim),
    ]
    if dim <= 2:
        models.append(CloudModel(ExponentialPotential(-0.5, 3.0), 0.25, dim, quad_tol=1e-3))

    return models


@pytest.fixture
def built_in_models():
    """Factory for one instance of every built-in family in a given dimension."""
    return make_built_in_models
