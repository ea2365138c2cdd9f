"""Sweep (mu0, lambda) grids into the efficient surface and verify the trade-off numerically.

Implements:
- `SurfacePoint`, `Surface`
- `parse_grid`, `default_lambda_grid`, `default_mu0_grid`: grid helpers.
- `risk_risk_frontier`: one minimum-risk portfolio per lambda.
- `full_surface`: one return-targeted portfolio per (mu0, lambda) cell.
- `tradeoff_check`: finite-difference check of lambda * sigma2' + (1 - lambda) * kappa' = 0.
- `eigenbasis_weights`, `analytic_risk_curves`: closed forms for commuting Sigma and C.
- `envelope_curve`: F(lambda) = lambda * sigma2 + (1 - lambda) * kappa and its second differences.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal, NamedTuple, TypeVar

import numpy as np

from connectedness_surface.qp import (
    InfeasibleTargetError,
    SolverError,
    certify,
    solve_closed_form,
    solve_long_only,
    solve_with_return_target,
)
from connectedness_surface.riskmodel import (
    ModelValidationError,
    Portfolio,
    RiskModel,
    check_lambda,
    detect_degenerate,
    hybrid_matrix,
    portfolio_risks,
)
from connectedness_surface.utils import (
    ComputationError,
    InputError,
    fingerprint,
    resolve_workers,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Sequence

    from connectedness_surface.qp import SolveReport
    from connectedness_surface.utils import FloatArray

logger = logging.getLogger("connectedness_surface")

T = TypeVar("T")
R = TypeVar("R")

Status = Literal["ok", "infeasible"]
_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class CommutationError(InputError):
    """Sigma and C do not share an eigenbasis."""


class SweepError(ComputationError):
    """A grid cell could not be solved."""


@dataclass(frozen=True, eq=False)
class SurfacePoint:
    """One solved cell of a sweep.

    Attributes:
        lam: Trade-off parameter.
        mu0: Return target, None on the risk-risk frontier.
        expected_return: w^T mu.
        variance: w^T Sigma w.
        connectedness: w^T C w.
        weights: The optimal portfolio, None for infeasible cells.
        binding_return: Whether the return target binds at the optimum.
        status: "ok" or "infeasible".
    """

    lam: float
    mu0: float | None
    expected_return: float
    variance: float
    connectedness: float
    weights: Portfolio | None
    binding_return: bool = False
    status: Status = "ok"

    @classmethod
    def infeasible(cls, lam: float, mu0: float | None) -> SurfacePoint:
        """A cell whose return target cannot be reached."""
        return cls(lam, mu0, math.nan, math.nan, math.nan, None, status="infeasible")


@dataclass(frozen=True, eq=False)
class Surface:
    """Sweep result, row-major over (mu0 grid) x (lambda grid).

    Attributes:
        points: The cells; a frontier has one row.
        lambda_grid: Trade-off parameters, strictly increasing.
        mu0_grid: Return targets, None for a risk-risk frontier.
        long_only: Whether weights were constrained to be nonnegative.
        model_fingerprint: SHA256 over the model inputs.
        labels: Asset identifiers.
    """

    points: tuple[SurfacePoint, ...]
    lambda_grid: tuple[float, ...]
    mu0_grid: tuple[float, ...] | None
    long_only: bool
    model_fingerprint: str
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        rows = 1 if self.mu0_grid is None else len(self.mu0_grid)
        if len(self.points) != rows * len(self.lambda_grid):
            raise InputError(
                f"Surface has {len(self.points)} points, expected"
                f" {rows} x {len(self.lambda_grid)}."
            )

    @property
    def shape(self) -> tuple[int, int]:
        """(number of mu0 rows, number of lambda columns)."""
        rows = 1 if self.mu0_grid is None else len(self.mu0_grid)
        return rows, len(self.lambda_grid)

    def point(self, row: int, column: int) -> SurfacePoint:
        """The cell at (mu0 index, lambda index)."""
        return self.points[row * len(self.lambda_grid) + column]

    @property
    def infeasible_count(self) -> int:
        """Number of cells marked infeasible."""
        return sum(point.status == "infeasible" for point in self.points)


class TradeoffCheck(NamedTuple):
    """Finite-difference derivatives of the risk curves at one lambda."""

    lam: float
    dsigma2: float
    dkappa: float
    identity_residual: float
    slope: float
    expected_slope: float


class EigenbasisSolution(NamedTuple):
    """Closed-form optimum for commuting Sigma and C."""

    weights: Portfolio
    sigma2: float
    kappa: float


class RiskCurvePoint(NamedTuple):
    """Risks and their analytic lambda-derivatives."""

    lam: float
    sigma2: float
    kappa: float
    dsigma2: float
    dkappa: float


class EnvelopeCurve(NamedTuple):
    """Optimal hybrid loss along a uniform lambda grid."""

    lambda_grid: tuple[float, ...]
    values: FloatArray
    second_differences: FloatArray


def parse_grid(text: str) -> tuple[float, ...]:
    """Parse "a:b:step", "x,y,z" or a single number.

    Ranges include both end points; "0:1:0.05" yields exactly i / 20.

    Raises:
        InputError: For malformed text, a nonpositive step or a step not dividing b - a.
    """
    text = text.strip()
    is_range = ":" in text
    try:
        values = tuple(float(part) for part in text.split(":" if is_range else ","))
    except ValueError as err:
        raise InputError(f"Cannot parse grid {text!r}: {err}") from err
    if not all(math.isfinite(value) for value in values):
        raise InputError(f"Grid {text!r} contains non-finite values.")
    if not is_range:
        return values
    if len(values) != 3:  # noqa: PLR2004
        raise InputError(f"Range grid {text!r} must read a:b:step.")
    start, stop, step = values
    if step <= 0 or stop < start:
        raise InputError(f"Grid {text!r} needs a positive step and b >= a.")
    count = round((stop - start) / step)
    if abs(count * step - (stop - start)) > 1e-9 * max(1.0, abs(stop - start)):
        raise InputError(f"Step {step} does not divide [{start}, {stop}] in grid {text!r}.")
    if count == 0:
        return (start,)
    return tuple(start + (stop - start) * i / count for i in range(count + 1))


def default_lambda_grid() -> tuple[float, ...]:
    """0, 0.05, ..., 1."""
    return tuple(i / 20 for i in range(21))


def default_mu0_grid(model: RiskModel, points: int = 21) -> tuple[float, ...]:
    """`points` targets between the smallest and largest long-only attainable return."""
    if points < 1:
        raise InputError(f"points must be positive, got {points}")
    low, high = float(model.mu.min()), float(model.mu.max())
    if points == 1 or low == high:
        return (low,)
    return tuple(float(value) for value in np.linspace(low, high, points))


def check_lambda_grid(grid: Sequence[float]) -> tuple[float, ...]:
    """Validate a strictly increasing grid inside [0, 1]."""
    values = tuple(check_lambda(value) for value in grid)
    if not values:
        raise InputError("The lambda grid is empty.")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InputError("The lambda grid must be strictly increasing.")
    return values


def _check_mu0_grid(grid: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(value) for value in grid)
    if not values:
        raise InputError("The mu0 grid is empty.")
    if not all(math.isfinite(value) for value in values):
        raise InputError("The mu0 grid must be finite.")
    return values


def _parallel_map(func: Callable[[T], R], items: Iterable[T], workers: int | None) -> list[R]:
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) < 2:  # noqa: PLR2004
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _model_fingerprint(model: RiskModel) -> str:
    return fingerprint(model.sigma, model.conn, model.mu, labels=model.labels)


def _point(model: RiskModel, lam: float, mu0: float | None, report: SolveReport) -> SurfacePoint:
    risks = portfolio_risks(model, report.weights)
    return SurfacePoint(
        lam=lam,
        mu0=mu0,
        expected_return=risks.expected_return,
        variance=risks.variance,
        connectedness=risks.connectedness,
        weights=report.weights,
        binding_return=bool(report.theta > model.tolerances.binding),
    )


def _minimum_risk(model: RiskModel, lam: float, long_only: bool, tol: float) -> SolveReport:
    m = hybrid_matrix(model, lam)
    try:
        report = solve_long_only(m, tol) if long_only else solve_closed_form(m, regularize=True)
    except SolverError as err:
        raise SweepError(f"lambda = {lam}: {err}") from err
    certify(report, m, tolerances=model.tolerances)
    return report


def risk_risk_frontier(
    model: RiskModel,
    lambda_grid: Sequence[float],
    long_only: bool = False,
    workers: int | None = None,
    tol: float = 1e-9,
) -> Surface:
    """Minimize the hybrid loss once per lambda, without a return target.

    When C is proportional to Sigma every lambda has the same optimum, which is solved once.

    Args:
        model: The risk model.
        lambda_grid: Strictly increasing values in [0, 1].
        long_only: Enforce w >= 0.
        workers: Worker threads, see `resolve_workers`.
        tol: Active-set tolerance of the long-only solves.

    Returns:
        A one-row surface.

    Raises:
        SweepError: If a solve fails; the message names the lambda.
    """
    grid = check_lambda_grid(lambda_grid)
    logger.debug("Tracing the risk-risk frontier over %d lambdas.", len(grid))
    c = detect_degenerate(model)
    if c is not None:
        logger.warning("C = %.6g * Sigma: every lambda yields the minimum-variance portfolio.", c)
        report = _minimum_risk(model, 1.0, long_only, tol)
        points = [_point(model, lam, None, report) for lam in grid]
    else:
        points = _parallel_map(
            lambda lam: _point(
                model, lam, None, _minimum_risk(model, lam, long_only, tol)
            ),
            grid,
            workers,
        )
    return Surface(
        points=tuple(points),
        lambda_grid=grid,
        mu0_grid=None,
        long_only=long_only,
        model_fingerprint=_model_fingerprint(model),
        labels=model.labels,
    )


def _surface_cell(
    model: RiskModel, lam: float, mu0: float, long_only: bool, tol: float
) -> SurfacePoint:
    try:
        report = solve_with_return_target(
            model, lam, mu0, long_only=long_only, tol=tol, regularize=True
        )
    except InfeasibleTargetError:
        logger.debug("Cell (mu0 = %.6g, lambda = %.3g) is infeasible.", mu0, lam)
        return SurfacePoint.infeasible(lam, mu0)
    except SolverError as err:
        raise SweepError(f"cell (mu0 = {mu0!r}, lambda = {lam!r}): {err}") from err
    certify(report, hybrid_matrix(model, lam), model.mu, mu0, tolerances=model.tolerances)
    return _point(model, lam, mu0, report)


def full_surface(
    model: RiskModel,
    mu0_grid: Sequence[float],
    lambda_grid: Sequence[float],
    long_only: bool = False,
    workers: int | None = None,
    tol: float = 1e-9,
) -> Surface:
    """Minimize the hybrid loss subject to w^T mu >= mu0 on every grid cell.

    Unreachable targets are kept as infeasible cells so the grid stays rectangular.

    Raises:
        SweepError: If a feasible cell cannot be solved; the message names the cell.
    """
    lambdas = check_lambda_grid(lambda_grid)
    targets = _check_mu0_grid(mu0_grid)
    cells = [(mu0, lam) for mu0 in targets for lam in lambdas]
    logger.debug("Sweeping %d x %d surface cells.", len(targets), len(lambdas))
    points = _parallel_map(
        lambda cell: _surface_cell(model, cell[1], cell[0], long_only, tol),
        cells,
        workers,
    )
    return Surface(
        points=tuple(points),
        lambda_grid=lambdas,
        mu0_grid=targets,
        long_only=long_only,
        model_fingerprint=_model_fingerprint(model),
        labels=model.labels,
    )


def _risks_at(model: RiskModel, lam: float) -> tuple[float, float]:
    report = solve_closed_form(hybrid_matrix(model, lam), regularize=True)
    risks = portfolio_risks(model, report.weights)
    return risks.variance, risks.connectedness


def tradeoff_check(model: RiskModel, lam: float, h: float = 1e-5) -> TradeoffCheck:
    """Central finite differences of sigma2(lambda) and kappa(lambda), short sales allowed.

    Args:
        model: The risk model.
        lam: Interior trade-off parameter.
        h: Stencil half-width.

    Returns:
        The derivatives, the residual lambda * sigma2' + (1 - lambda) * kappa', the slope
        dsigma2 / dkappa (NaN when kappa' vanishes) and its expected value -(1 - lambda) / lambda.

    Raises:
        InputError: If the stencil leaves (0, 1).
    """
    lam = check_lambda(lam)
    if not h > 0 or not h < lam < 1.0 - h:
        raise InputError(f"lambda = {lam} is too close to 0 or 1 for step h = {h}.")
    sigma_up, kappa_up = _risks_at(model, lam + h)
    sigma_down, kappa_down = _risks_at(model, lam - h)
    dsigma2 = (sigma_up - sigma_down) / (2.0 * h)
    dkappa = (kappa_up - kappa_down) / (2.0 * h)
    return TradeoffCheck(
        lam=lam,
        dsigma2=dsigma2,
        dkappa=dkappa,
        identity_residual=lam * dsigma2 + (1.0 - lam) * dkappa,
        slope=dsigma2 / dkappa if dkappa != 0 else math.nan,
        expected_slope=-(1.0 - lam) / lam,
    )


def _common_basis(model: RiskModel) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Return (U, sigma_i^2, c_i) with Sigma = U diag(sigma^2) U^T and C = U diag(c) U^T."""
    sigma, conn = model.sigma, model.conn
    scale_sigma = float(np.linalg.norm(sigma))
    scale_conn = float(np.linalg.norm(conn))
    commutator = float(np.linalg.norm(sigma @ conn - conn @ sigma))
    if commutator > model.tolerances.commute * scale_sigma * scale_conn:
        raise CommutationError(
            f"Sigma and C do not commute (||Sigma C - C Sigma||_F = {commutator:.3g})."
        )
    # An irrational mix separates eigenvalues that only one of the matrices repeats.
    phi = _GOLDEN * scale_sigma / scale_conn if scale_conn > 0 else 0.0
    _, basis = np.linalg.eigh(sigma + phi * conn)
    sigma_diag = np.einsum("ji,jk,ki->i", basis, sigma, basis)
    conn_diag = np.einsum("ji,jk,ki->i", basis, conn, basis)
    if np.any(sigma_diag <= 0) or np.any(conn_diag <= 0):
        raise ModelValidationError("Sigma and C must have strictly positive eigenvalues.")
    return basis, sigma_diag, conn_diag


def eigenbasis_weights(model: RiskModel, lam: float) -> EigenbasisSolution:
    """Optimum and risks from the shared eigenbasis of commuting Sigma and C.

    With eta = U^T 1, D_i = lambda * sigma_i^2 + (1 - lambda) * c_i and
    Z = sum_k eta_k^2 / D_k, the optimum is w = U x with x_i = eta_i / (Z D_i), and

        sigma2 = sum_i eta_i^2 sigma_i^2 / D_i^2 / Z^2,   kappa = sum_i eta_i^2 c_i / D_i^2 / Z^2.

    Raises:
        CommutationError: If Sigma and C do not commute.
        ModelValidationError: If an eigenvalue is not positive.
    """
    lam = check_lambda(lam)
    basis, sigma_diag, conn_diag = _common_basis(model)
    eta = basis.sum(axis=0)
    denom = lam * sigma_diag + (1.0 - lam) * conn_diag
    z = float(np.sum(eta**2 / denom))
    weights = basis @ (eta / (z * denom))
    return EigenbasisSolution(
        weights=Portfolio(weights),
        sigma2=float(np.sum(eta**2 * sigma_diag / denom**2)) / z**2,
        kappa=float(np.sum(eta**2 * conn_diag / denom**2)) / z**2,
    )


def analytic_risk_curves(
    model: RiskModel, lambda_grid: Sequence[float]
) -> list[RiskCurvePoint]:
    """sigma2, kappa and their exact lambda-derivatives for commuting Sigma and C.

    With d_i = sigma_i^2 - c_i, S = sum a_i / D_i^2 for a_i = eta_i^2 sigma_i^2 (or
    eta_i^2 c_i for kappa):

        S' = -2 sum a_i d_i / D_i^3,   Z' = -sum eta_i^2 d_i / D_i^2,
        (S / Z^2)' = S' / Z^2 - 2 S Z' / Z^3.

    Raises:
        CommutationError: If Sigma and C do not commute.
        ModelValidationError: If an eigenvalue is not positive.
    """
    grid = check_lambda_grid(lambda_grid)
    basis, sigma_diag, conn_diag = _common_basis(model)
    eta2 = basis.sum(axis=0) ** 2
    slope = sigma_diag - conn_diag
    curves = []
    for lam in grid:
        denom = lam * sigma_diag + (1.0 - lam) * conn_diag
        z = float(np.sum(eta2 / denom))
        dz = -float(np.sum(eta2 * slope / denom**2))
        values = []
        for spectrum in (sigma_diag, conn_diag):
            a = eta2 * spectrum
            s = float(np.sum(a / denom**2))
            ds = -2.0 * float(np.sum(a * slope / denom**3))
            values.append((s / z**2, ds / z**2 - 2.0 * s * dz / z**3))
        (sigma2, dsigma2), (kappa, dkappa) = values
        curves.append(RiskCurvePoint(lam, sigma2, kappa, dsigma2, dkappa))
    return curves


def envelope_curve(
    model: RiskModel, lambda_grid: Sequence[float], long_only: bool = False
) -> EnvelopeCurve:
    """F(lambda) = lambda * sigma2 + (1 - lambda) * kappa at the optimum, on a uniform grid.

    F is a pointwise minimum of affine functions of lambda, so its second differences
    are nonpositive up to solver accuracy.

    Raises:
        InputError: If the grid has fewer than three points or is not uniform.
    """
    grid = check_lambda_grid(lambda_grid)
    if len(grid) < 3:  # noqa: PLR2004
        raise InputError("The envelope needs at least three lambdas.")
    steps = np.diff(grid)
    if float(np.ptp(steps)) > 1e-9 * float(steps.max()):
        raise InputError("The envelope needs a uniform lambda grid.")
    values = np.empty(len(grid))
    for i, lam in enumerate(grid):
        risks = portfolio_risks(model, _minimum_risk(model, lam, long_only, 1e-9).weights)
        values[i] = lam * risks.variance + (1.0 - lam) * risks.connectedness
    return EnvelopeCurve(grid, values, values[:-2] - 2.0 * values[1:-1] + values[2:])


__all__ = [
    "CommutationError",
    "EigenbasisSolution",
    "EnvelopeCurve",
    "RiskCurvePoint",
    "Surface",
    "SurfacePoint",
    "SweepError",
    "TradeoffCheck",
    "analytic_risk_curves",
    "check_lambda_grid",
    "default_lambda_grid",
    "default_mu0_grid",
    "eigenbasis_weights",
    "envelope_curve",
    "full_surface",
    "parse_grid",
    "risk_risk_frontier",
    "tradeoff_check",
]
