import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return a @ a.conj().T / rank


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


@pytest.fixture(scope="session")
def paper_config():
    """N=4096, L=8, EPA block Rayleigh, four SUs, alpha=0.05, seed 0."""
    from specsense.experiment import ExperimentConfig
    return ExperimentConfig(trials=2000, calibration_trials=10_000, master_seed=0)


@pytest.fixture(scope="session")
def paper_calibration(paper_config):
    from specsense.experiment import run_null_calibration
    return run_null_calibration(paper_config)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
