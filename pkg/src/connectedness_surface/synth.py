"""Deterministic synthetic return panels.

All draws come from `numpy.random.Generator(numpy.random.PCG64(seed))`, so a seed
reproduces the same panel on every platform.

Implements:
- `REGIMES`: the supported data-generating processes.
- `generate_panel`: iid, single-factor or VAR(1) returns on business days from 2000-01-03.
- `var1_coefficients`, `simulate_var1`: the stable VAR(1) used by the var1 regime.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Literal, get_args

import numpy as np
import pandas as pd

from connectedness_surface.estimation import ReturnPanel
from connectedness_surface.utils import InputError

if TYPE_CHECKING:
    from connectedness_surface.utils import FloatArray

logger = logging.getLogger("connectedness_surface")

Regime = Literal["iid", "factor", "var1"]
REGIMES: tuple[str, ...] = get_args(Regime)

START_DATE = "2000-01-03"
BURN_IN = 100


def var1_coefficients(n: int) -> FloatArray:
    """0.4 * I plus 0.1 on the cyclic superdiagonal; [[0.5]] for a single asset."""
    if n == 1:
        return np.array([[0.5]])
    return 0.4 * np.eye(n) + 0.1 * np.roll(np.eye(n), 1, axis=1)


def simulate_var1(
    coef: FloatArray, t: int, rng: np.random.Generator, scale: float = 0.01
) -> FloatArray:
    """Simulate r_t = A r_{t-1} + e_t with e_t ~ N(0, scale^2 I) after a burn-in."""
    n = coef.shape[0]
    shocks = scale * rng.standard_normal((t + BURN_IN, n))
    path = np.zeros((t + BURN_IN, n))
    for i in range(1, t + BURN_IN):
        path[i] = coef @ path[i - 1] + shocks[i]
    return path[BURN_IN:]


def generate_panel(seed: int, n: int, t: int, regime: str = "iid") -> ReturnPanel:
    """Draw a T x N return panel.

    Args:
        seed: PCG64 seed.
        n: Number of assets.
        t: Number of business days.
        regime: "iid" for independent N(0.0005, 0.01^2) returns, "factor" for one common
            N(0, 0.01^2) factor plus 0.0025-scaled noise, "var1" for `simulate_var1`.

    Returns:
        The panel with labels asset_1, ..., asset_N.

    Raises:
        InputError: For an unknown regime or nonpositive sizes.
    """
    if regime not in REGIMES:
        raise InputError(f"Unknown regime {regime!r}; choose from {', '.join(REGIMES)}.")
    if n < 1 or t < 1:
        raise InputError(f"n and t must be positive, got n = {n}, t = {t}")
    if seed < 0:
        raise InputError(f"seed must be non-negative, got {seed}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if regime == "iid":
        returns = 0.0005 + 0.01 * rng.standard_normal((t, n))
    elif regime == "factor":
        factor = 0.01 * rng.standard_normal((t, 1))
        returns = factor + 0.0025 * rng.standard_normal((t, n))
    else:
        returns = simulate_var1(var1_coefficients(n), t, rng)
    logger.debug("Generated a %s panel of %d x %d (seed %d).", regime, t, n, seed)
    return ReturnPanel(
        dates=pd.bdate_range(START_DATE, periods=t),
        returns=returns,
        labels=tuple(f"asset_{i + 1}" for i in range(n)),
    )


__all__ = [
    "REGIMES",
    "Regime",
    "generate_panel",
    "simulate_var1",
    "var1_coefficients",
]
