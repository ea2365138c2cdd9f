"""Solvers for the hybrid-risk quadratic program.

Implements:
- `solve_closed_form`: minimize w^T M w subject to the budget constraint only.
- `solve_long_only`: primal active-set method on the simplex.
- `solve_with_return_target`: adds w^T mu >= mu0, optionally long-only.
- `check_kkt` / `certify`: KKT certificates for a returned solution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
import scipy.linalg

from connectedness_surface.riskmodel import Portfolio, hybrid_matrix
from connectedness_surface.utils import (
    DEFAULT_TOLERANCES,
    ComputationError,
    InputError,
    InvariantViolation,
    Tolerances,
)

if TYPE_CHECKING:
    from connectedness_surface.riskmodel import HybridMatrix, RiskModel
    from connectedness_surface.utils import FloatArray

logger = logging.getLogger("connectedness_surface")

RIDGE_SCALE = 1e-12
_FLAT_RETURNS = 1e-12


class SolverError(ComputationError):
    """The quadratic program could not be solved."""


class NotPositiveDefiniteError(SolverError):
    """The hybrid matrix is singular or indefinite."""


class IterationLimitError(SolverError):
    """The active-set iteration cap was reached."""


class InfeasibleTargetError(SolverError):
    """No feasible portfolio attains the return target."""


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Optimal weights and multipliers of one quadratic program.

    Attributes:
        weights: The optimal portfolio.
        nu: Multiplier of the budget constraint.
        gamma: Multipliers of w_i >= 0 (zero for free assets).
        theta: Multiplier of the return target (zero when inactive or absent).
        active_set: Indices pinned at zero.
        iterations: Active-set iterations.
        objective: Attained w^T M w.
        releases: Indices released from the active set.
        regularized: Whether a ridge was added to a singular M.
        ridge: The ridge added to the diagonal of M.
    """

    weights: Portfolio
    nu: float
    gamma: FloatArray
    theta: float
    active_set: tuple[int, ...]
    iterations: int
    objective: float
    releases: int = 0
    regularized: bool = False
    ridge: float = 0.0


class KKTResiduals(NamedTuple):
    """Residuals of the KKT system at a solution."""

    stationarity: float
    slackness: float
    dual: float


class _ActiveSetResult(NamedTuple):
    weights: FloatArray
    nu: float
    theta: float
    gamma: FloatArray
    active: tuple[int, ...]
    iterations: int
    releases: int


def _prepare(
    matrix: FloatArray, regularize: bool, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> tuple[FloatArray, float]:
    """Check definiteness of `matrix` and add a ridge when it is singular.

    Raises:
        NotPositiveDefiniteError: If `matrix` is indefinite, or singular and
            `regularize` is False.
    """
    n = matrix.shape[0]
    eigenvalues = np.linalg.eigvalsh(matrix)
    top = max(float(eigenvalues[-1]), 0.0)
    if eigenvalues[0] < -tolerances.psd * max(1.0, top):
        raise NotPositiveDefiniteError(
            f"M is indefinite (smallest eigenvalue {eigenvalues[0]:.3g})."
        )
    trace = float(np.trace(matrix))
    ridge = RIDGE_SCALE * (trace / n if trace > 0 else 1.0)
    if eigenvalues[0] > ridge:
        return matrix, 0.0
    if not regularize:
        raise NotPositiveDefiniteError(
            f"M is singular (smallest eigenvalue {eigenvalues[0]:.3g});"
            " lambda = 0 needs a nonsingular connectedness matrix."
        )
    logger.warning("M is singular; adding ridge %.3g to its diagonal.", ridge)
    return matrix + ridge * np.eye(n), ridge


def _ldl_solve(kkt: FloatArray, rhs: FloatArray) -> FloatArray:
    """Solve a symmetric indefinite system through its LDL^T factorization."""
    lu, d, perm = scipy.linalg.ldl(kkt, lower=True)
    pivots = np.abs(np.linalg.eigvals(d))
    if pivots.size == 0 or pivots.min() <= 1e-14 * max(pivots.max(), 1.0):
        raise SolverError("Singular KKT system on the free set.")
    triangular = lu[perm]
    z = scipy.linalg.solve_triangular(triangular, rhs[perm], lower=True, unit_diagonal=True)
    u = np.linalg.solve(d, z)
    solution = np.empty_like(rhs)
    solution[perm] = scipy.linalg.solve_triangular(
        triangular.T, u, lower=False, unit_diagonal=True
    )
    if not np.all(np.isfinite(solution)):
        raise SolverError("Non-finite solution of the KKT system.")
    return solution


def _flat(values: FloatArray) -> bool:
    scale = max(1.0, float(np.max(np.abs(values))))
    return float(np.ptp(values)) <= _FLAT_RETURNS * scale


def _face_solve(
    matrix: FloatArray,
    free: list[int],
    mu: FloatArray | None,
    mu0: float,
) -> tuple[FloatArray, float, float, bool]:
    """Minimize w^T M w on the face spanned by `free`.

    Solves the bordered system [[2 M_FF, 1, mu_F], [1^T, 0, 0], [mu_F^T, 0, 0]]; the
    return row is dropped when mu is absent or constant on the face.

    Returns:
        Free weights, nu, theta and whether theta is determined by the face.
    """
    k = len(free)
    sub = matrix[np.ix_(free, free)]
    with_return = mu is not None and not _flat(mu[free])
    size = k + (2 if with_return else 1)
    kkt = np.zeros((size, size))
    rhs = np.zeros(size)
    kkt[:k, :k] = 2.0 * sub
    kkt[:k, k] = kkt[k, :k] = 1.0
    rhs[k] = 1.0
    if with_return:
        assert mu is not None  # noqa: S101
        kkt[:k, k + 1] = kkt[k + 1, :k] = mu[free]
        rhs[k + 1] = mu0
    solution = _ldl_solve(kkt, rhs)
    theta = -float(solution[k + 1]) if with_return else 0.0
    return solution[:k], -float(solution[k]), theta, with_return or mu is None


def _vertex_theta(
    grad: FloatArray, nu: float, mu: FloatArray, free: list[int], active: set[int]
) -> tuple[float, float]:
    """Smallest theta >= 0 keeping the multipliers dual feasible on a flat-return face.

    On such a face only nu + theta * mu_F is identified by stationarity.
    """
    mu_face = float(mu[free[0]])
    bounds = [
        (nu - grad[i]) / (mu_face - mu[i]) for i in sorted(active) if mu[i] < mu_face
    ]
    theta = float(max([0.0, *bounds]))
    return float(nu - theta * mu_face), theta


def _active_set(
    matrix: FloatArray,
    start: FloatArray,
    tol: float,
    max_iter: int,
    mu: FloatArray | None = None,
    mu0: float = 0.0,
) -> _ActiveSetResult:
    """Primal active-set iteration from a feasible `start`.

    Each iteration solves the equality-constrained problem on the free face, then either
    steps towards its optimum (clipping at the first blocking bound), or, at a face
    optimum, releases the active index with the most negative multiplier.
    """
    n = start.size
    w = start.copy()
    active = {int(i) for i in np.flatnonzero(w <= 0)}
    releases = 0
    for iteration in range(1, max_iter + 1):
        free = [i for i in range(n) if i not in active]
        if not free:
            raise SolverError("The active set covers every asset.")
        y, nu, theta, identified = _face_solve(matrix, free, mu, mu0)
        target = np.zeros(n)
        target[free] = y
        step = target - w
        logger.debug(
            "Iteration %d: free=%s active=%s |p|=%.3g",
            iteration,
            free,
            sorted(active),
            float(np.max(np.abs(step))),
        )

        if float(np.max(np.abs(step))) <= tol:
            if target.min() < 0:
                target = np.maximum(target, 0.0)
                target /= target.sum()
            w = target
            grad = 2.0 * matrix @ w
            if not identified:
                assert mu is not None  # noqa: S101
                nu, theta = _vertex_theta(grad, nu, mu, free, active)
            stationary = grad - nu
            if mu is not None:
                stationary = stationary - theta * mu
            gamma = np.zeros(n)
            ordered = sorted(active)
            gamma[ordered] = stationary[ordered]
            if not ordered or gamma[ordered].min() >= -tol:
                return _ActiveSetResult(
                    w, nu, theta, gamma, tuple(ordered), iteration, releases
                )
            release = ordered[int(np.argmin(gamma[ordered]))]
            logger.debug("Releasing index %d (gamma = %.3g).", release, gamma[release])
            active.remove(release)
            releases += 1
            continue

        alpha, blocking = 1.0, None
        for i in free:
            if step[i] < 0:
                ratio = max(-w[i] / step[i], 0.0)
                if ratio < alpha:
                    alpha, blocking = ratio, i
        w = w + alpha * step
        if blocking is not None:
            logger.debug("Step %.3g blocked by index %d.", alpha, blocking)
            w[blocking] = 0.0
            active.add(blocking)

    raise IterationLimitError(
        f"Active-set method did not converge within {max_iter} iterations."
    )


def _long_only_report(result: _ActiveSetResult, matrix: FloatArray, ridge: float) -> SolveReport:
    w = result.weights
    return SolveReport(
        weights=Portfolio(w, long_only=True),
        nu=result.nu,
        gamma=result.gamma,
        theta=result.theta,
        active_set=result.active,
        iterations=result.iterations,
        objective=float(w @ matrix @ w),
        releases=result.releases,
        regularized=ridge > 0,
        ridge=ridge,
    )


def solve_closed_form(m: HybridMatrix, regularize: bool = False) -> SolveReport:
    """Minimize w^T M w subject to 1^T w = 1.

    The solution is M^{-1} 1 / (1^T M^{-1} 1).

    Args:
        m: The hybrid matrix.
        regularize: Add a ridge instead of failing when M is singular.

    Returns:
        The solve report; short positions are allowed.

    Raises:
        NotPositiveDefiniteError: If M is not positive definite.
    """
    matrix, ridge = _prepare(np.asarray(m.matrix), regularize, m.tolerances)
    n = matrix.shape[0]
    try:
        factor = scipy.linalg.cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {err}") from err
    x = scipy.linalg.cho_solve(factor, np.ones(n))
    total = float(x.sum())
    if not total > 0:
        raise NotPositiveDefiniteError("1^T M^{-1} 1 is not positive.")
    objective = 1.0 / total
    return SolveReport(
        weights=Portfolio(x / total),
        nu=2.0 * objective,
        gamma=np.zeros(n),
        theta=0.0,
        active_set=(),
        iterations=0,
        objective=objective,
        regularized=ridge > 0,
        ridge=ridge,
    )


def solve_long_only(
    m: HybridMatrix, tol: float = 1e-9, max_iter: int | None = None
) -> SolveReport:
    """Minimize w^T M w on the simplex with the active-set method.

    Starts from the equal-weight portfolio. Ties in the release rule and in the blocking
    bound go to the smallest index. A singular M gets a ridge and is flagged.

    Args:
        m: The hybrid matrix.
        tol: Step and multiplier tolerance.
        max_iter: Iteration cap, default 10 * N.

    Returns:
        The solve report.

    Raises:
        NotPositiveDefiniteError: If M is indefinite.
        IterationLimitError: If the iteration cap is exceeded.
    """
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol!r}")
    matrix, ridge = _prepare(np.asarray(m.matrix), True, m.tolerances)
    n = matrix.shape[0]
    result = _active_set(matrix, np.full(n, 1.0 / n), tol, max_iter or 10 * n)
    return _long_only_report(result, matrix, ridge)


def max_attainable_return(mu: FloatArray, long_only: bool) -> float:
    """Largest w^T mu on the feasible set (infinite with short sales unless mu is flat)."""
    if long_only or _flat(mu):
        return float(mu.max())
    return math.inf


def _feasible_start(mu: FloatArray, mu0: float) -> FloatArray:
    """A long-only portfolio with return exactly `mu0`, strictly positive when possible."""
    n = mu.size
    mean = float(mu.mean())
    if mu0 >= mean:
        k = int(np.argmax(mu))
        spread = float(mu[k]) - mean
        t = (mu0 - mean) / spread if spread > 0 else 0.0
    else:
        k = int(np.argmin(mu))
        t = (mean - mu0) / (mean - float(mu[k]))
    t = min(max(t, 0.0), 1.0)
    start = np.full(n, (1.0 - t) / n)
    start[k] += t
    return start


def solve_with_return_target(
    model: RiskModel,
    lam: float,
    mu0: float,
    long_only: bool = False,
    tol: float = 1e-9,
    regularize: bool = False,
) -> SolveReport:
    """Minimize w^T M_lambda w subject to 1^T w = 1 and w^T mu >= mu0.

    The problem is first solved without the return target; if that solution misses the
    target, it is solved again with w^T mu = mu0 as a second equality.

    Args:
        model: The risk model.
        lam: Trade-off parameter.
        mu0: Return target; -inf disables it.
        long_only: Enforce w >= 0.
        tol: Active-set tolerance.
        regularize: Add a ridge instead of failing on a singular M (short sales only;
            the long-only solver always regularizes).

    Returns:
        The solve report with theta >= 0.

    Raises:
        InfeasibleTargetError: If no feasible portfolio reaches `mu0`.
        SolverError: If the solvers fail.
    """
    mu0 = float(mu0)
    if math.isnan(mu0):
        raise InputError("mu0 must be a number.")
    mu = model.mu
    best = max_attainable_return(mu, long_only)
    scale = max(1.0, float(np.max(np.abs(mu))))
    if mu0 > best + _FLAT_RETURNS * scale:
        raise InfeasibleTargetError(
            f"Return target {mu0!r} exceeds the maximum attainable return {best!r}."
        )

    m = hybrid_matrix(model, lam)
    first = solve_long_only(m, tol) if long_only else solve_closed_form(m, regularize)
    if float(first.weights.weights @ mu) >= mu0 - 1e-12:
        return first

    logger.debug("Return target %.6g binds at lambda = %.3g.", mu0, lam)
    regularize = regularize or long_only
    matrix, ridge = _prepare(np.asarray(m.matrix), regularize, m.tolerances)
    n = model.n
    if long_only:
        mu0 = min(mu0, best)
        result = _active_set(matrix, _feasible_start(mu, mu0), tol, 10 * n, mu, mu0)
        report = _long_only_report(result, matrix, ridge)
    else:
        y, nu, theta, _ = _face_solve(matrix, list(range(n)), mu, mu0)
        report = SolveReport(
            weights=Portfolio(y),
            nu=nu,
            gamma=np.zeros(n),
            theta=theta,
            active_set=(),
            iterations=1,
            objective=float(y @ matrix @ y),
            regularized=ridge > 0,
            ridge=ridge,
        )
    if report.theta < -model.tolerances.dual:
        raise SolverError(
            f"Return-target multiplier is negative ({report.theta:.3g}) at lambda = {lam}."
        )
    return report


def check_kkt(
    report: SolveReport,
    m: HybridMatrix,
    mu: FloatArray | None = None,
    mu0: float | None = None,
) -> KKTResiduals:
    """Residuals of 2 M w - nu 1 - theta mu - gamma = 0 and complementary slackness.

    `dual` is the most negative multiplier (zero when all are nonnegative).
    """
    matrix = np.asarray(m.matrix)
    if report.ridge:
        matrix = matrix + report.ridge * np.eye(matrix.shape[0])
    w = report.weights.weights
    residual = 2.0 * matrix @ w - report.nu - report.gamma
    slack = [float(np.max(np.abs(report.gamma * w)))]
    if mu is not None:
        residual = residual - report.theta * mu
        if mu0 is not None and math.isfinite(mu0):
            slack.append(abs(report.theta * (float(w @ mu) - mu0)))
    return KKTResiduals(
        stationarity=float(np.max(np.abs(residual))),
        slackness=max(slack),
        dual=min(0.0, float(report.gamma.min()), report.theta),
    )


def certify(
    report: SolveReport,
    m: HybridMatrix,
    mu: FloatArray | None = None,
    mu0: float | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> KKTResiduals:
    """Check the KKT certificate of `report`.

    Raises:
        InvariantViolation: If any residual exceeds its tolerance.
    """
    residuals = check_kkt(report, m, mu, mu0)
    if (
        residuals.stationarity > tolerances.stationarity
        or residuals.slackness > tolerances.slackness
        or residuals.dual < -tolerances.dual
    ):
        raise InvariantViolation(f"KKT certificate failed at lambda = {m.lam}: {residuals}")
    return residuals


__all__ = [
    "InfeasibleTargetError",
    "IterationLimitError",
    "KKTResiduals",
    "NotPositiveDefiniteError",
    "SolveReport",
    "SolverError",
    "certify",
    "check_kkt",
    "max_attainable_return",
    "solve_closed_form",
    "solve_long_only",
    "solve_with_return_target",
]
