import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from socialsat import synth
from socialsat.pipeline import process_session

settings.register_profile("repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(scope="session")
def small_corpus():
    """Twelve short synthetic sessions, strongly separable."""
    return synth.generate_corpus(synth.SynthConfig(n_sessions=12, seed=5, delta=1.0, duration_scale=0.15))


@pytest.fixture(scope="session")
def small_channel_sets(small_corpus):
    c = small_corpus
    return [process_session(s.tracks, c.calibration, s.faces, s.markers) for s in c.sessions]


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
