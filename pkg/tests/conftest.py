import pytest

from zotnet import pipeline
from zotnet.config import SimulationConfig


def pytest_configure(config):
    config._criteria = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for the terminal summary, then assert."""

    def check(number: int, name: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        request.config._criteria.append(line)
        print(line)
        assert ok, line

    return check


@pytest.fixture(scope="session")
def small_config():
    return SimulationConfig(duration_s=900, dev_duration_s=7200, dev_users_per_persona=2, min_bucket_samples=5)


@pytest.fixture(scope="session")
def small_dev(small_config):
    return pipeline.run_development(small_config)


@pytest.fixture(scope="session")
def noise_free_config():
    return SimulationConfig(tolerance_noise_std=0.0)


@pytest.fixture(scope="session")
def noise_free_dev(noise_free_config):
    """Three users per persona over a full day, no tolerance noise."""
    return pipeline.run_development(noise_free_config)
