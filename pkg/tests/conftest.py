"""Shared fixtures: one benchmark-sized dataset and its design mechanism."""

from __future__ import annotations

import pytest

from smartcea.dgp import DgpConfig, embedded_regimes, simulate_smart
from smartcea.estimate import estimate_g


@pytest.fixture(scope="session")
def trial():
    """A single benchmark-sized trial draw, reused read-only across tests."""
    return simulate_smart(DgpConfig(n=1809, seed=11))


@pytest.fixture(scope="session")
def g_known(trial):
    return estimate_g(trial, "known")


@pytest.fixture(scope="session")
def g_fitted(trial):
    return estimate_g(trial, "fitted")


@pytest.fixture(scope="session")
def regimes():
    return embedded_regimes()
