"""Shared fixtures: the two worked-example models and seeded random models."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from connectedness_surface.riskmodel import RiskModel

if TYPE_CHECKING:
    from collections.abc import Callable

SIGMA_A = 0.05 * np.array(
    [
        [4.8435, -1.9906, -0.9228],
        [-1.9906, 2.5743, 2.7723],
        [-0.9228, 2.7723, 6.9938],
    ]
)

SIGMA_C = np.array(
    [[0.040, 0.030, 0.020], [0.030, 0.090, 0.010], [0.020, 0.010, 0.160]]
)
CONN_C = np.array([[0.100, -0.020, 0.0], [-0.020, 0.050, 0.010], [0.0, 0.010, 0.020]])
MU_C = np.array([0.08, 0.06, 0.10])


def random_model(seed: int, n: int, proportional: float | None = None) -> RiskModel:
    """A random positive definite pair; `proportional` sets C = c * Sigma."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    sigma = a @ a.T / n + 0.1 * np.eye(n)
    conn = proportional * sigma if proportional is not None else b @ b.T / n + 0.1 * np.eye(n)
    return RiskModel(sigma=sigma, conn=conn, mu=rng.normal(0.05, 0.02, n))


def commuting_model(seed: int, n: int) -> RiskModel:
    """Sigma and C sharing a random orthonormal eigenbasis."""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    sigma = (basis * rng.uniform(0.5, 2.0, n)) @ basis.T
    conn = (basis * rng.uniform(0.5, 2.0, n)) @ basis.T
    return RiskModel(sigma=sigma, conn=conn, mu=rng.normal(0.05, 0.02, n))


@pytest.fixture
def model_a() -> RiskModel:
    """Three assets with C = Sigma; the long-only optimum drops the third asset."""
    return RiskModel(sigma=SIGMA_A, conn=SIGMA_A, mu=np.array([0.05, 0.07, 0.09]))


@pytest.fixture
def model_c() -> RiskModel:
    """Three assets whose hybrid optimum leaves the corner-fund hull."""
    return RiskModel(sigma=SIGMA_C, conn=CONN_C, mu=MU_C)


@pytest.fixture
def make_model() -> Callable[..., RiskModel]:
    """Factory for seeded random models."""
    return random_model
