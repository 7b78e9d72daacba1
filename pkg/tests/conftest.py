import pytest

from app.dsl.parser import ModelBundle
from app.services import corpus_loader


def load(name: str) -> ModelBundle:
    return corpus_loader.load_model(name)


@pytest.fixture(scope="session")
def arsonists() -> ModelBundle:
    return load("arsonists")


@pytest.fixture(scope="session")
def arsonists_scenarios() -> ModelBundle:
    return load("arsonists_scenarios")


@pytest.fixture(scope="session")
def example1() -> ModelBundle:
    return load("example1")


@pytest.fixture(scope="session")
def voting() -> ModelBundle:
    return load("voting")


@pytest.fixture(scope="session")
def suzy() -> ModelBundle:
    return load("suzy")


@pytest.fixture(scope="session")
def parity5() -> ModelBundle:
    return load("parity5")


@pytest.fixture(scope="session")
def tumor9() -> ModelBundle:
    return load("tumor9")
