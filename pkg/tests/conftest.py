import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hqcpinn.reference_solver import ScenarioSpec, generate_dataset, temporal_split

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset():
    """Two short reaches; enough records for smoke-level training."""
    spec = ScenarioSpec(duration=20 * 86_400.0, n_storms=6, n_reaches=2, seed=3)
    return generate_dataset(spec)


@pytest.fixture(scope="session")
def small_splits(small_dataset):
    return temporal_split(small_dataset)


@pytest.fixture(scope="session")
def benchmark_dataset():
    """The bundled default benchmark."""
    return generate_dataset(ScenarioSpec(seed=3))


@pytest.fixture(scope="session")
def benchmark_splits(benchmark_dataset):
    return temporal_split(benchmark_dataset)


ACCEPTANCE: dict[str, str] = {}


def _criterion_order(label: str):
    digits = "".join(c for c in label if c.isdigit())
    return int(digits), label


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE, key=_criterion_order):
            terminalreporter.write_line(ACCEPTANCE[k])
