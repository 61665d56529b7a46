"""Shared fixtures: canonical market parameters and eigensolver warmup."""

import numpy as np
import pytest

from etabs import MarketParams, TridiagonalOperator, eigendecompose, eigenvalues_only, make_lattice


@pytest.fixture(scope="session")
def plain_params():
    """The workhorse market: sigma = 0.2, r = 0.05."""
    return MarketParams(sigma=0.2, r=0.05)


@pytest.fixture(scope="session")
def small_lattice():
    return make_lattice(-2.0, 2.0, 60)


@pytest.fixture(scope="session", autouse=True)
def _warm_eigensolver():
    """Trigger the JIT compile of the QL solver before any timed assertion.

    The solver caches its compiled form on disk, but a cold cache would bill
    several seconds of compilation to whichever timed test runs first.
    """
    lat = make_lattice(0.0, 1.0, 5)
    off = np.full(4, -1.0)
    S = TridiagonalOperator(diag=np.full(5, 2.0), upper=off, lower=off.copy(), lattice=lat)
    eigendecompose(S)
    eigenvalues_only(S)
