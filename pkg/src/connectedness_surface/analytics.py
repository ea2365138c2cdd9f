"""Connectedness betas, corner funds and three-fund decompositions.

Implements:
- `connectedness_betas`, `top_betas`: marginal connectedness contributions 2 C w.
- `corner_funds`: minimum-variance, minimum-connectedness and maximum-return portfolios.
- `three_fund_decompose`: barycentric coordinates of a portfolio on the corner funds.
- `separation_scan`: decompositions along a lambda grid.
- `long_only_cost`: objective increase caused by the nonnegativity constraint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
import pandas as pd
import scipy.linalg

from connectedness_surface.qp import (
    certify,
    solve_closed_form,
    solve_long_only,
)
from connectedness_surface.riskmodel import (
    DimensionError,
    Portfolio,
    RiskModel,
    evaluate_loss,
    hybrid_matrix,
)
from connectedness_surface.surface import check_lambda_grid
from connectedness_surface.utils import DEFAULT_TOLERANCES, ComputationError, InputError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from connectedness_surface.qp import SolveReport
    from connectedness_surface.utils import FloatArray, Tolerances

logger = logging.getLogger("connectedness_surface")

# Singular values below this fraction of the largest count as zero.
_RANK_TOL = 1e-9


class RankDeficiencyError(ComputationError):
    """The corner funds are affinely dependent."""


class CornerFunds(NamedTuple):
    """The three funds spanning the efficient set."""

    mv: Portfolio
    mc: Portfolio
    maxmu: Portfolio


@dataclass(frozen=True)
class FundDecomposition:
    """Barycentric coordinates of a portfolio on (w_mv, w_mc, w_maxmu).

    Attributes:
        alphas: Coefficients on the minimum-variance, minimum-connectedness and
            maximum-return funds.
        convex: All coefficients are nonnegative (down to the tolerance).
        residual: Max-norm reconstruction error of the least-squares solve.
        representable: The residual is small enough for the target to lie in the span.
    """

    alphas: tuple[float, float, float]
    convex: bool
    residual: float
    representable: bool


@dataclass(frozen=True)
class ScanRow:
    """Decomposition of the hybrid optimum at one lambda."""

    lam: float
    weights: Portfolio
    decomposition: FundDecomposition


@dataclass(frozen=True)
class SeparationScan:
    """Decompositions along a lambda grid.

    Attributes:
        funds: The corner funds used throughout.
        rows: One row per lambda.
    """

    funds: CornerFunds
    rows: tuple[ScanRow, ...]

    @property
    def all_convex(self) -> bool:
        """Whether every optimum lies in the convex hull of the corner funds."""
        return all(row.decomposition.convex for row in self.rows)

    @property
    def violations(self) -> tuple[float, ...]:
        """Lambdas whose optimum leaves the convex hull."""
        return tuple(row.lam for row in self.rows if not row.decomposition.convex)


class LongOnlyCost(NamedTuple):
    """Hybrid loss with and without short sales."""

    unrestricted: float
    long_only: float
    delta: float
    relative: float


def connectedness_betas(model: RiskModel, p: Portfolio) -> FloatArray:
    """beta_i = 2 [C w]_i; the betas satisfy sum_i w_i beta_i = 2 w^T C w."""
    if p.n != model.n:
        raise DimensionError(f"Portfolio has {p.n} weights, model has {model.n} assets.")
    return 2.0 * (model.conn @ p.weights)


def top_betas(model: RiskModel, p: Portfolio, k: int = 15) -> pd.DataFrame:
    """The `k` largest connectedness betas as a `label, beta` frame, largest first."""
    if k < 1:
        raise InputError(f"k must be positive, got {k}")
    frame = pd.DataFrame({"label": list(model.labels), "beta": connectedness_betas(model, p)})
    return frame.sort_values("beta", ascending=False, kind="stable").head(k).reset_index(
        drop=True
    )


def _certified(report: SolveReport, model: RiskModel, lam: float) -> Portfolio:
    certify(report, hybrid_matrix(model, lam), tolerances=model.tolerances)
    return report.weights


def corner_funds(model: RiskModel, long_only: bool = False) -> CornerFunds:
    """Solve for the corner funds.

    The maximum-return fund is the unit portfolio on the largest mean (lowest index on
    ties) in both regimes, since the program is unbounded with short sales.

    Args:
        model: The risk model.
        long_only: Enforce w >= 0 for the two minimum-risk funds.

    Returns:
        The minimum-variance, minimum-connectedness and maximum-return portfolios.

    Raises:
        SolverError: If a minimum-risk solve fails.
    """
    funds = []
    for lam in (1.0, 0.0):
        m = hybrid_matrix(model, lam)
        report = solve_long_only(m) if long_only else solve_closed_form(m, regularize=True)
        funds.append(_certified(report, model, lam))
    maxmu = Portfolio.unit(model.n, int(np.argmax(model.mu)))
    return CornerFunds(mv=funds[0], mc=funds[1], maxmu=maxmu)


def three_fund_decompose(
    funds: CornerFunds, target: Portfolio, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> FundDecomposition:
    """Express `target` as sum_k alpha_k w^(k) with sum_k alpha_k = 1.

    Solves the stacked system [w^(1) w^(2) w^(3); 1 1 1] alpha = [target; 1] by least
    squares.

    Raises:
        DimensionError: If the portfolios differ in size.
        RankDeficiencyError: If the corner funds are affinely dependent.
    """
    if any(fund.n != target.n for fund in funds):
        raise DimensionError("Corner funds and target must have the same number of assets.")
    stacked = np.vstack([np.column_stack([fund.weights for fund in funds]), np.ones((1, 3))])
    singular = scipy.linalg.svdvals(stacked)
    if singular[-1] <= _RANK_TOL * singular[0]:
        raise RankDeficiencyError(
            "The corner funds are affinely dependent (singular values"
            f" {', '.join(f'{value:.3g}' for value in singular)})."
        )
    rhs = np.append(target.weights, 1.0)
    alphas, *_ = scipy.linalg.lstsq(stacked, rhs)
    residual = float(np.max(np.abs(stacked[:-1] @ alphas - target.weights)))
    convex = bool(alphas.min() >= -tolerances.negative_alpha)
    return FundDecomposition(
        alphas=(float(alphas[0]), float(alphas[1]), float(alphas[2])),
        convex=convex,
        residual=residual,
        representable=residual <= tolerances.representable,
    )


def separation_scan(model: RiskModel, lambda_grid: Sequence[float]) -> SeparationScan:
    """Decompose the short-sale optimum w*(lambda) for every grid lambda.

    Raises:
        RankDeficiencyError: If the corner funds are affinely dependent.
    """
    grid = check_lambda_grid(lambda_grid)
    funds = corner_funds(model)
    rows = []
    for lam in grid:
        weights = solve_closed_form(hybrid_matrix(model, lam), regularize=True).weights
        decomposition = three_fund_decompose(funds, weights, model.tolerances)
        if not decomposition.convex:
            logger.debug("w*(%.3g) leaves the corner-fund hull: %s.", lam, decomposition.alphas)
        rows.append(ScanRow(lam, weights, decomposition))
    return SeparationScan(funds=funds, rows=tuple(rows))


def long_only_cost(model: RiskModel, lam: float) -> LongOnlyCost:
    """Hybrid loss of the unrestricted and the long-only optimum."""
    m = hybrid_matrix(model, lam)
    unrestricted = evaluate_loss(m, solve_closed_form(m, regularize=True).weights)
    constrained = evaluate_loss(m, solve_long_only(m).weights)
    delta = constrained - unrestricted
    return LongOnlyCost(
        unrestricted=unrestricted,
        long_only=constrained,
        delta=delta,
        relative=delta / unrestricted if unrestricted > 0 else 0.0,
    )


__all__ = [
    "CornerFunds",
    "FundDecomposition",
    "LongOnlyCost",
    "RankDeficiencyError",
    "ScanRow",
    "SeparationScan",
    "connectedness_betas",
    "corner_funds",
    "long_only_cost",
    "separation_scan",
    "three_fund_decompose",
    "top_betas",
]
