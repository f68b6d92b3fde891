import pytest

from hplsv import (
    TrainConfig,
    bundled_scenario,
    constant_source,
    train,
)


@pytest.fixture(scope="session")
def demo_scenario():
    return bundled_scenario("demo")


@pytest.fixture(scope="session")
def big_scenario():
    return bundled_scenario("demo_100x100")


@pytest.fixture(scope="session")
def demo_model(demo_scenario):
    """Defaults, seed 42: the reference trained model for the demo scenario."""
    return train(constant_source(demo_scenario), TrainConfig(seed=42))


@pytest.fixture(scope="session")
def tiny_model(demo_scenario):
    """Short training run for tests that only need a populated table."""
    return train(constant_source(demo_scenario), TrainConfig(episodes=300, seed=5))
