import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mobgp.gp.params import TrainingSet
from mobgp.markov import TimeBinScheme, bin_observations, estimate_empirical
from mobgp.synth import SimulationConfig, TransitionFunctionSpec, simulate_chain

settings.register_profile("mobgp", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mobgp")

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects one summary line per acceptance criterion."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sinusoid_spec():
    return TransitionFunctionSpec.sinusoid(0.5, 0.3, cycles_per_week=7)


@pytest.fixture(scope="session")
def weekly_data(sinusoid_spec):
    """Hourly training set from 200 simulated weeks (seed 0)."""
    seq = simulate_chain(sinusoid_spec, SimulationConfig(weeks=200, seed=0))
    ds = estimate_empirical(bin_observations(seq, TimeBinScheme(1)))
    return TrainingSet.from_dataset(ds)
