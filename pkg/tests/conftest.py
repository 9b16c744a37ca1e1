import pytest

from finslerkit import metrics, tensors


@pytest.fixture(scope="session")
def catalog3():
    return metrics.catalog(3)


@pytest.fixture(scope="session")
def funk(catalog3):
    return catalog3["funk_ball_berwald"]


@pytest.fixture(scope="session")
def euclid(catalog3):
    return catalog3["euclidean"]


@pytest.fixture(scope="session")
def skew(catalog3):
    return catalog3["riemannian_flat_skew"]


@pytest.fixture(scope="session")
def sphere(catalog3):
    return catalog3["riemannian_round_sphere"]


@pytest.fixture
def origin_point():
    """Center of the ball, axis velocity: every tensor there has a short closed form."""
    return tensors.PhasePoint((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
