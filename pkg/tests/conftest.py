from __future__ import annotations

import pytest

from synthtrials import fixtures
from synthtrials.dataspec import stratified_split


@pytest.fixture(scope="session")
def actg():
    return fixtures.actg_like(n=1151, seed=0)


@pytest.fixture(scope="session")
def sc():
    return fixtures.survival_columns()


@pytest.fixture(scope="session")
def actg_split(actg):
    return stratified_split(actg, 0.2, seed=7)


@pytest.fixture(scope="session")
def small_actg():
    return fixtures.actg_like(n=300, seed=11)
