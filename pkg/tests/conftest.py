"""Shared fixtures: the engineered landing map and a generic normalized map."""

from __future__ import annotations

import warnings

import numpy as np
import pytest

import ruelleop as R

warnings.filterwarnings("ignore", category=RuntimeWarning)


@pytest.fixture(scope="session")
def landing():
    return R.landing_preset()


@pytest.fixture(scope="session")
def landing_cd(landing):
    return R.critical_data(landing.map, 40.0)


@pytest.fixture(scope="session")
def landing_cd80(landing):
    return R.critical_data(landing.map, 80.0)


@pytest.fixture(scope="session")
def soft_map():
    """Normalized 0.3 + 0.7 sin z (small slope: attracting real fixed point)."""
    return R.normalize(R.EntireMap((0.3,), (0, 0.7), (0, 1)))


@pytest.fixture(scope="session")
def soft_cd(soft_map):
    return R.critical_data(soft_map, 40.0)


def circle_samples(n=20, radius=2.0, seed=7):
    rng = np.random.default_rng(seed)
    return radius * np.exp(2j * np.pi * rng.random(n))
