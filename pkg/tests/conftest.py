import pytest

from canonsys.kernel import kernel_of
from canonsys.unimodular import make_function


@pytest.fixture(scope="session")
def pw():
    u = make_function("pw", [1.0])
    return u, kernel_of(u)


@pytest.fixture(scope="session")
def mobius():
    u = make_function("mobius")
    return u, kernel_of(u)


@pytest.fixture(scope="session")
def gamma():
    u = make_function("gamma_ratio")
    return u, kernel_of(u)
