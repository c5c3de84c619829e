import numpy as np
import pytest

from apef import datagen
from apef.series import TimeSeries


@pytest.fixture(scope="session")
def observations():
    return datagen.default_observations()


@pytest.fixture(scope="session")
def dataset(observations):
    return datagen.generate_dataset(observations, n=20, seed=0)


@pytest.fixture()
def bumpy_series():
    """A smooth two-bump series with a clear rise/fall pattern."""
    t = np.arange(120, dtype=float)
    vals = 1.0 + 3.0 * np.exp(-0.5 * ((t - 42) / 10) ** 2) + 1.5 * np.exp(
        -0.5 * ((t - 75) / 7) ** 2
    )
    return TimeSeries("bumpy", "GPP", vals)


def pytest_runtest_logreport(report):
    # One visible PASS/FAIL line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\n[{'PASS' if report.passed else 'FAIL'}] {name}")
