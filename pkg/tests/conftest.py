import numpy as np
import pytest

from sgldlab import (
    GaussianLocationModel,
    LinearRegressorModel,
    LogisticDataset,
    LogisticPosteriorModel,
    MixturePriorModel,
    VariationalMixtureModel,
)
from sgldlab.experiments import gen_figure1_data

A_HAT = np.array([3.0, -3.0])


@pytest.fixture(scope="session")
def small_dataset() -> LogisticDataset:
    """20-point logistic dataset for the finite-difference oracles."""
    rng = np.random.default_rng(7)
    z = rng.normal(0.0, 0.3, (20, 2))
    w = np.array([1.0, -2.0])
    y = (rng.random(20) < 1.0 / (1.0 + np.exp(-z @ w))).astype(float)
    return LogisticDataset(z, y)


@pytest.fixture(scope="session")
def figure1_dataset() -> LogisticDataset:
    return gen_figure1_data(seed=0)


@pytest.fixture(scope="session")
def logreg_model(figure1_dataset) -> LogisticPosteriorModel:
    return LogisticPosteriorModel(figure1_dataset, A_HAT, n_batch=10, beta=1.0)


@pytest.fixture(scope="session")
def vi_model(small_dataset) -> VariationalMixtureModel:
    return VariationalMixtureModel(small_dataset, A_HAT)


@pytest.fixture(scope="session")
def gaussian_model() -> GaussianLocationModel:
    return GaussianLocationModel(dim=2, sigma_data=1.0)


@pytest.fixture(scope="session")
def mixture_model() -> MixturePriorModel:
    return MixturePriorModel([2.0])


@pytest.fixture(scope="session")
def linear_model() -> LinearRegressorModel:
    return LinearRegressorModel(dim=2)
