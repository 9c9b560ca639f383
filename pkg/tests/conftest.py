"""Shared generators for randomized test instances."""

from __future__ import annotations

import numpy as np
import pytest

from epiqubo import (
    EpidemicParams,
    EpidemicState,
    LocationNetwork,
    ModelKind,
    QuboProblem,
    invariance_bound,
)


def random_network(rng: np.random.Generator, m: int, density: float = 0.5) -> LocationNetwork:
    """Random directed network: density-thinned U(0,1) weights, n in [10, 1000]."""
    populations = rng.uniform(10.0, 1000.0, size=m)
    weights = rng.uniform(0.0, 1.0, size=(m, m)) * (rng.random((m, m)) < density)
    np.fill_diagonal(weights, 0.0)
    return LocationNetwork(populations, weights)


def random_instance(rng: np.random.Generator, kind: ModelKind, m: int):
    """Random (network, params, state, gamma) with the rate inside the safe bound."""
    net = random_network(rng, m)
    lam = rng.uniform(0.2, 0.999) * invariance_bound(net)
    mu = rng.uniform(0.05, 1.0)
    gamma = rng.uniform(0.0, 0.1)
    params = EpidemicParams(kind, lam, mu)
    if ModelKind(kind) is ModelKind.SIS:
        state = EpidemicState(rng.uniform(0.0, 1.0, m) * net.populations)
    else:
        total = rng.uniform(0.0, 1.0, m)
        split = rng.uniform(0.0, 1.0, m)
        state = EpidemicState(
            total * split * net.populations,
            total * (1.0 - split) * net.populations,
        )
    return net, params, state, gamma


def random_qubo(rng: np.random.Generator, m: int, density: float = 0.5) -> QuboProblem:
    """Random quadratic binary objective with standard-normal coefficients."""
    linear = rng.normal(size=m)
    quadratic = {}
    for i in range(m):
        for j in range(i + 1, m):
            if rng.random() < density:
                quadratic[(i, j)] = float(rng.normal())
    return QuboProblem(linear, quadratic, float(rng.normal()))


def all_bits(m: int) -> np.ndarray:
    """Every binary vector of length m, in lexicographic order."""
    ks = np.arange(1 << m, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((ks[:, None] >> shifts) & 1).astype(np.int8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
