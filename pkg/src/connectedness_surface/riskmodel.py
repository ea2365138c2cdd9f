"""Risk matrices, portfolios and the hybrid matrix M_lambda.

Implements:
- `RiskModel`: covariance Sigma, connectedness C and expected returns mu for N assets.
- `Portfolio`: a weight vector on the budget hyperplane.
- `HybridMatrix`: the convex combination lambda * Sigma + (1 - lambda) * C.
- `hybrid_matrix`, `evaluate_loss`, `portfolio_risks`, `detect_degenerate`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from connectedness_surface.utils import (
    DEFAULT_TOLERANCES,
    InputError,
    Tolerances,
    asymmetry,
    project_psd,
    symmetrize,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike
    from typing_extensions import Self

    from connectedness_surface.utils import FloatArray

logger = logging.getLogger("connectedness_surface")


class ModelValidationError(InputError):
    """A risk matrix violates symmetry or definiteness requirements."""


class DimensionError(InputError):
    """Array dimensions do not agree."""


def _as_matrix(values: ArrayLike, name: str) -> FloatArray:
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ModelValidationError(f"{name} contains non-finite entries.")
    return matrix


def _as_vector(values: ArrayLike, name: str) -> FloatArray:
    vector = np.array(values, dtype=np.float64)
    if vector.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise InputError(f"{name} contains non-finite entries.")
    return vector


def _symmetric(matrix: FloatArray, name: str, tolerances: Tolerances) -> FloatArray:
    """Symmetrize `matrix`, warning or rejecting according to its asymmetry."""
    gap = asymmetry(matrix)
    if gap == 0.0:
        return matrix
    scale = max(float(np.max(np.abs(matrix))), np.finfo(np.float64).tiny)
    if gap > tolerances.symmetry_reject * scale:
        raise ModelValidationError(
            f"{name} is not symmetric: max |A - A^T| = {gap:.3g}"
            f" exceeds {tolerances.symmetry_reject:g} relative to its scale."
        )
    if gap > tolerances.symmetry_warn:
        logger.warning("Symmetrizing %s (max |A - A^T| = %.3g).", name, gap)
    return symmetrize(matrix)


def _frozen(array: FloatArray) -> FloatArray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RiskModel:
    """Paired risk matrices and expected returns for N assets.

    Inputs are copied, symmetrized and validated at construction; the stored arrays are
    read-only.

    Attributes:
        sigma: Covariance matrix, positive definite.
        conn: Connectedness matrix, positive semidefinite.
        mu: Expected returns per period.
        labels: Asset identifiers; defaults to `asset_1`, ..., `asset_N`.
        tci: Total connectedness index of the estimation window, if estimated.
        window_end: Last date of the estimation window, if estimated.
        fevd: Row-normalized FEVD the connectedness matrix was built from, if estimated.
    """

    sigma: FloatArray
    conn: FloatArray
    mu: FloatArray
    labels: tuple[str, ...] = ()
    tci: float | None = None
    window_end: str | None = None
    fevd: FloatArray | None = None
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self) -> None:
        tol = self.tolerances
        sigma = _symmetric(_as_matrix(self.sigma, "sigma"), "sigma", tol)
        n = sigma.shape[0]
        conn = _symmetric(_as_matrix(self.conn, "conn"), "conn", tol)
        if conn.shape != (n, n):
            raise DimensionError(f"conn has shape {conn.shape}, expected {(n, n)}")
        mu = _as_vector(self.mu, "mu")
        if mu.shape != (n,):
            raise DimensionError(f"mu has length {mu.size}, expected {n}")

        labels = tuple(str(label) for label in self.labels) or tuple(
            f"asset_{i + 1}" for i in range(n)
        )
        if len(labels) != n:
            raise DimensionError(f"Got {len(labels)} labels for {n} assets.")
        if len(set(labels)) != n:
            raise InputError("Asset labels must be unique.")

        min_sigma = float(np.linalg.eigvalsh(sigma)[0])
        if min_sigma <= 0:
            raise ModelValidationError(
                f"sigma is not positive definite (smallest eigenvalue {min_sigma:.3g})."
            )
        min_conn = float(np.linalg.eigvalsh(conn)[0])
        if min_conn < -tol.psd:
            raise ModelValidationError(
                f"conn is not positive semidefinite (smallest eigenvalue {min_conn:.3g})."
            )
        if min_conn < 0:
            logger.warning("Clipping eigenvalue %.3g of conn to zero.", min_conn)
            conn = project_psd(conn)

        fevd = self.fevd
        if fevd is not None:
            fevd = np.array(fevd, dtype=np.float64)
            if fevd.shape != (n, n):
                raise DimensionError(f"fevd has shape {fevd.shape}, expected {(n, n)}")
            fevd = _frozen(fevd)

        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "conn", _frozen(conn))
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "fevd", fevd)
        if self.tci is not None:
            object.__setattr__(self, "tci", float(self.tci))

    @property
    def n(self) -> int:
        """Number of assets."""
        return int(self.sigma.shape[0])

    def reordered(self, order: Sequence[int]) -> Self:
        """Return the same model with the assets in `order`."""
        index = np.asarray(order, dtype=np.intp)
        if sorted(index.tolist()) != list(range(self.n)):
            raise InputError(f"{list(order)} is not a permutation of {self.n} assets.")
        grid = np.ix_(index, index)
        return type(self)(
            sigma=self.sigma[grid],
            conn=self.conn[grid],
            mu=self.mu[index],
            labels=tuple(self.labels[i] for i in index),
            tci=self.tci,
            window_end=self.window_end,
            fevd=None if self.fevd is None else self.fevd[grid],
            tolerances=self.tolerances,
        )


@dataclass(frozen=True, eq=False)
class Portfolio:
    """A weight vector with sum one.

    Attributes:
        weights: Portfolio weights.
        long_only: Whether nonnegativity was enforced.
    """

    weights: FloatArray
    long_only: bool = False
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self) -> None:
        weights = _as_vector(self.weights, "weights")
        if weights.size == 0:
            raise DimensionError("A portfolio needs at least one asset.")
        total = float(weights.sum())
        if abs(total - 1.0) > self.tolerances.budget:
            raise InputError(f"Weights sum to {total!r}, not 1.")
        if self.long_only and float(weights.min()) < -self.tolerances.nonneg:
            raise InputError(
                f"Long-only portfolio has a negative weight {float(weights.min())!r}."
            )
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def n(self) -> int:
        """Number of assets."""
        return int(self.weights.size)

    @classmethod
    def equal(cls, n: int) -> Self:
        """The equally weighted portfolio 1/N."""
        return cls(np.full(n, 1.0 / n), long_only=True)

    @classmethod
    def unit(cls, n: int, index: int) -> Self:
        """The portfolio fully invested in asset `index`."""
        weights = np.zeros(n)
        weights[index] = 1.0
        return cls(weights, long_only=True)


@dataclass(frozen=True, eq=False)
class HybridMatrix:
    """M_lambda = lambda * Sigma + (1 - lambda) * C."""

    lam: float
    matrix: FloatArray
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    @property
    def n(self) -> int:
        """Number of assets."""
        return int(self.matrix.shape[0])


class PortfolioRisks(NamedTuple):
    """Expected return, variance and connectedness risk of a portfolio."""

    expected_return: float
    variance: float
    connectedness: float


def check_lambda(lam: float) -> float:
    """Validate a trade-off parameter."""
    lam = float(lam)
    if not math.isfinite(lam) or not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must lie in [0, 1], got {lam!r}")
    return lam


def _check_dims(n: int, p: Portfolio) -> None:
    if p.n != n:
        raise DimensionError(f"Portfolio has {p.n} weights, model has {n} assets.")


def hybrid_matrix(model: RiskModel, lam: float) -> HybridMatrix:
    """Blend the two risk matrices.

    Args:
        model: The risk model.
        lam: Trade-off parameter; 1 gives Sigma, 0 gives C.

    Returns:
        The hybrid matrix, symmetric by construction.

    Raises:
        InputError: If `lam` lies outside [0, 1].
    """
    lam = check_lambda(lam)
    if lam == 1.0:
        matrix = model.sigma.copy()
    elif lam == 0.0:
        matrix = model.conn.copy()
    else:
        matrix = lam * model.sigma + (1.0 - lam) * model.conn
    return HybridMatrix(lam, _frozen(matrix), model.tolerances)


def evaluate_loss(m: HybridMatrix, p: Portfolio) -> float:
    """Hybrid loss w^T M_lambda w."""
    _check_dims(m.n, p)
    w = p.weights
    return float(w @ m.matrix @ w)


def portfolio_risks(model: RiskModel, p: Portfolio) -> PortfolioRisks:
    """Return (w^T mu, w^T Sigma w, w^T C w)."""
    _check_dims(model.n, p)
    w = p.weights
    return PortfolioRisks(
        expected_return=float(w @ model.mu),
        variance=float(w @ model.sigma @ w),
        connectedness=float(w @ model.conn @ w),
    )


def detect_degenerate(model: RiskModel, rel_tol: float = 1e-8) -> float | None:
    """Detect C = c * Sigma with c > 0.

    The proportionality constant is the least-squares fit c = tr(C Sigma) / tr(Sigma Sigma).

    Args:
        model: The risk model.
        rel_tol: Bound on ||C - c Sigma||_F / ||C||_F.

    Returns:
        c if the matrices are proportional within `rel_tol`, otherwise None.
    """
    if rel_tol < 0:
        raise InputError(f"rel_tol must be non-negative, got {rel_tol!r}")
    sigma, conn = model.sigma, model.conn
    conn_norm = float(np.linalg.norm(conn))
    if conn_norm == 0.0:
        return None
    c = float(np.sum(conn * sigma) / np.sum(sigma * sigma))
    if c <= 0:
        return None
    residual = float(np.linalg.norm(conn - c * sigma)) / conn_norm
    if residual > rel_tol:
        return None
    logger.debug("C is proportional to Sigma (c = %.6g, residual %.3g).", c, residual)
    return c


__all__ = [
    "DimensionError",
    "HybridMatrix",
    "ModelValidationError",
    "Portfolio",
    "PortfolioRisks",
    "RiskModel",
    "check_lambda",
    "detect_degenerate",
    "evaluate_loss",
    "hybrid_matrix",
    "portfolio_risks",
]
