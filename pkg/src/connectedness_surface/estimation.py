"""Estimate a RiskModel from a panel of asset returns.

Implements:
- `ReturnPanel`, `EstimationConfig`
- `shrink_covariance`: sample covariance shrunk towards a scaled identity.
- `fit_var1`: least-squares VAR(1) with intercept.
- `generalized_fevd`: row-normalized generalized forecast error variance decomposition.
- `connectedness_matrix`: symmetric PSD spillover matrix and total connectedness index.
- `spillover_table`: directional to/from/net spillovers.
- `estimate_model`, `rolling_models`: the full pipeline for one or many windows.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal, NamedTuple, Union

import numpy as np
import pandas as pd
import scipy.linalg
from sklearn.covariance import ledoit_wolf_shrinkage

from connectedness_surface.riskmodel import DimensionError, RiskModel
from connectedness_surface.utils import (
    ComputationError,
    InputError,
    project_psd,
    resolve_workers,
    symmetrize,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from typing_extensions import Self

    from connectedness_surface.utils import FloatArray

logger = logging.getLogger("connectedness_surface")

Shrinkage = Union[float, Literal["auto"]]  # noqa: UP007


class EstimationError(ComputationError):
    """Estimation on a window failed."""


class InsufficientDataError(EstimationError):
    """Not enough observations for the requested window."""


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """Simple returns of N assets over T strictly increasing dates.

    Attributes:
        dates: Observation dates.
        returns: T x N matrix of returns.
        labels: Asset identifiers.
    """

    dates: pd.DatetimeIndex
    returns: FloatArray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        dates = pd.DatetimeIndex(self.dates)
        returns = np.array(self.returns, dtype=np.float64)
        if returns.ndim != 2:
            raise DimensionError(f"returns must be a T x N matrix, got {returns.shape}")
        if returns.shape != (len(dates), len(self.labels)):
            raise DimensionError(
                f"returns have shape {returns.shape}, expected"
                f" {(len(dates), len(self.labels))}"
            )
        if not dates.is_monotonic_increasing or not dates.is_unique:
            raise InputError("Dates must be strictly increasing.")
        if not np.all(np.isfinite(returns)):
            raise InputError("Returns contain missing or non-finite cells.")
        returns.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "labels", tuple(str(label) for label in self.labels))

    @property
    def n(self) -> int:
        """Number of assets."""
        return len(self.labels)

    @property
    def t(self) -> int:
        """Number of observations."""
        return len(self.dates)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> Self:
        """Build a panel from a date-indexed frame with one column per asset."""
        return cls(
            dates=pd.DatetimeIndex(frame.index),
            returns=frame.to_numpy(dtype=np.float64),
            labels=tuple(str(column) for column in frame.columns),
        )

    def to_frame(self) -> pd.DataFrame:
        """The panel as a date-indexed frame."""
        return pd.DataFrame(
            np.array(self.returns), index=self.dates.rename("date"), columns=list(self.labels)
        )

    def window(self, end: int, length: int) -> Self:
        """The `length` observations ending at position `end` (inclusive)."""
        start = end - length + 1
        if start < 0 or end >= self.t:
            raise InsufficientDataError(
                f"insufficient observations: window of {length} ending at row {end + 1}"
                f" needs {length} rows, {end + 1} available"
            )
        return type(self)(
            self.dates[start : end + 1], self.returns[start : end + 1], self.labels
        )


@dataclass(frozen=True)
class EstimationConfig:
    """Estimation parameters.

    Attributes:
        window: Rolling window length in periods.
        fevd_horizon: Forecast horizon H of the FEVD.
        shrinkage: Shrinkage intensity in [0, 1], or "auto" for Ledoit-Wolf.
    """

    window: int = 252
    fevd_horizon: int = 10
    shrinkage: Shrinkage = "auto"

    def __post_init__(self) -> None:
        if self.window < 3:  # noqa: PLR2004
            raise InputError(f"window must be at least 3, got {self.window}")
        if self.fevd_horizon < 1:
            raise InputError(f"fevd_horizon must be at least 1, got {self.fevd_horizon}")
        if self.shrinkage != "auto" and not 0.0 <= float(self.shrinkage) <= 1.0:
            raise InputError(f"shrinkage must be in [0, 1] or 'auto', got {self.shrinkage!r}")


class VarFit(NamedTuple):
    """Coefficient matrix and residual covariance of a VAR(1)."""

    coef: FloatArray
    resid_cov: FloatArray


class Connectedness(NamedTuple):
    """Symmetric PSD spillover matrix and its total connectedness index."""

    conn: FloatArray
    tci: float


def _check_columns(panel: ReturnPanel) -> None:
    constant = np.flatnonzero(np.ptp(panel.returns, axis=0) == 0)
    if constant.size:
        names = ", ".join(panel.labels[i] for i in constant)
        raise EstimationError(f"zero-variance column(s): {names}")


def shrink_covariance(panel_window: ReturnPanel, config: EstimationConfig) -> FloatArray:
    """Shrink the sample covariance towards (tr(S) / N) * I.

    Args:
        panel_window: The estimation window.
        config: Supplies the intensity; "auto" uses the Ledoit-Wolf estimate.

    Returns:
        (1 - delta) * S + delta * (tr(S) / N) * I with S the sample covariance (T - 1).

    Raises:
        InsufficientDataError: With fewer than two observations.
        EstimationError: If a column is constant.
    """
    x = np.asarray(panel_window.returns)
    t, n = x.shape
    if t < 2:  # noqa: PLR2004
        raise InsufficientDataError(f"insufficient observations: {t} rows")
    _check_columns(panel_window)
    sample = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))

    if config.shrinkage == "auto":
        # Ledoit-Wolf: with S_T = X^T X / T on demeaned X and m = tr(S_T) / N,
        #   d2 = ||S_T - m I||_F^2,  b2 = min(d2, sum_t ||x_t x_t^T - S_T||_F^2 / T^2),
        #   delta = b2 / d2.
        delta = float(ledoit_wolf_shrinkage(x - x.mean(axis=0), assume_centered=True))
    else:
        delta = float(config.shrinkage)
    logger.debug("Shrinkage intensity %.4f over %d observations.", delta, t)

    target = np.trace(sample) / n
    return (1.0 - delta) * sample + delta * target * np.eye(n)


def fit_var1(panel_window: ReturnPanel) -> VarFit:
    """Least-squares fit of r_t = a_0 + A r_{t-1} + e_t.

    The intercept is estimated and discarded. The residual covariance uses T_eff - 1.

    Raises:
        InsufficientDataError: If T < N + 2.
        EstimationError: If the regressors are collinear.
    """
    x = np.asarray(panel_window.returns)
    t, n = x.shape
    if t < n + 2:
        raise InsufficientDataError(
            f"insufficient observations: VAR(1) on {n} assets needs {n + 2} rows, got {t}"
        )
    y = x[1:]
    regressors = np.column_stack([np.ones(t - 1), x[:-1]])
    cross = regressors.T @ regressors
    if np.linalg.matrix_rank(regressors) < n + 1:
        raise EstimationError("singular regressor cross-product (collinear assets)")
    try:
        factor = scipy.linalg.cho_factor(cross, lower=True)
    except np.linalg.LinAlgError as err:
        raise EstimationError(
            "singular regressor cross-product (collinear assets)"
        ) from err
    params = scipy.linalg.cho_solve(factor, regressors.T @ y)
    resid = y - regressors @ params
    resid_cov = symmetrize(resid.T @ resid / (t - 2))
    return VarFit(coef=params[1:].T, resid_cov=resid_cov)


def generalized_fevd(coef: FloatArray, resid_cov: FloatArray, horizon: int) -> FloatArray:
    """Row-normalized generalized FEVD of a stationary VAR(1).

    With Phi_h = A^h, the share of asset i's H-step forecast error variance due to shocks
    in asset j is

        theta_ij = sum_h (e_i' Phi_h Omega e_j)^2 / Omega_jj / sum_h (e_i' Phi_h Omega Phi_h' e_i),

    summed over h = 0, ..., H - 1; rows are then scaled to sum to one.

    Raises:
        InputError: If `horizon` < 1 or the shapes disagree.
        EstimationError: If A is not stationary or Omega has a zero diagonal entry.
    """
    coef = np.atleast_2d(np.asarray(coef, dtype=np.float64))
    resid_cov = np.atleast_2d(np.asarray(resid_cov, dtype=np.float64))
    n = coef.shape[0]
    if coef.shape != (n, n) or resid_cov.shape != (n, n):
        raise DimensionError(
            f"coef {coef.shape} and resid_cov {resid_cov.shape} must both be {(n, n)}"
        )
    if horizon < 1:
        raise InputError(f"horizon must be at least 1, got {horizon}")
    radius = float(np.max(np.abs(np.linalg.eigvals(coef))))
    if radius >= 1:
        raise EstimationError(f"VAR(1) is not stationary (spectral radius {radius:.4f})")
    variances = np.diag(resid_cov)
    if np.any(variances <= 0):
        raise EstimationError("Residual covariance has a zero diagonal entry.")
    if float(np.linalg.eigvalsh(symmetrize(resid_cov))[0]) < -1e-10 * float(variances.max()):
        raise EstimationError("Residual covariance is not positive semidefinite.")

    numerator = np.zeros((n, n))
    denominator = np.zeros(n)
    phi = np.eye(n)
    for _ in range(horizon):
        response = phi @ resid_cov
        numerator += response**2
        denominator += np.einsum("ij,ij->i", response, phi)
        phi = coef @ phi
    theta = numerator / variances[np.newaxis, :] / denominator[:, np.newaxis]
    return theta / theta.sum(axis=1, keepdims=True)


def connectedness_matrix(fevd: FloatArray) -> Connectedness:
    """Symmetrize the off-diagonal FEVD into a PSD connectedness matrix.

    C = (D_off + D_off^T) / 2, projected onto the PSD cone by clipping negative
    eigenvalues. TCI = 100 / N * sum of the off-diagonal shares.

    Raises:
        InputError: If `fevd` is not a nonnegative row-stochastic square matrix.
    """
    fevd = np.atleast_2d(np.asarray(fevd, dtype=np.float64))
    n = fevd.shape[0]
    if fevd.shape != (n, n):
        raise DimensionError(f"fevd must be square, got {fevd.shape}")
    if np.any(fevd < 0) or not np.allclose(fevd.sum(axis=1), 1.0, rtol=0, atol=1e-8):
        raise InputError("fevd must be nonnegative with rows summing to one.")
    off = fevd - np.diag(np.diag(fevd))
    tci = 100.0 * float(off.sum()) / n
    conn = project_psd(symmetrize(off))
    return Connectedness(conn=conn, tci=tci)


def spillover_table(fevd: FloatArray, labels: Sequence[str]) -> pd.DataFrame:
    """Directional spillovers in percent: to others, from others and net."""
    fevd = np.asarray(fevd, dtype=np.float64)
    off = 100.0 * (fevd - np.diag(np.diag(fevd)))
    to_others = off.sum(axis=0)
    from_others = off.sum(axis=1)
    return pd.DataFrame(
        {"to": to_others, "from": from_others, "net": to_others - from_others},
        index=pd.Index(list(labels), name="label"),
    )


def _iso(stamp: pd.Timestamp) -> str:
    if stamp == stamp.normalize():
        return stamp.strftime("%Y-%m-%d")
    return stamp.isoformat()


def _estimate_window(panel: ReturnPanel, end: int, config: EstimationConfig) -> RiskModel:
    window_end = _iso(panel.dates[end])
    logger.debug("Estimating window ending %s.", window_end)
    try:
        window = panel.window(end, config.window)
        sigma = shrink_covariance(window, config)
        coef, resid_cov = fit_var1(window)
        fevd = generalized_fevd(coef, resid_cov, config.fevd_horizon)
        conn, tci = connectedness_matrix(fevd)
    except EstimationError as err:
        raise type(err)(f"window ending {window_end}: {err}") from err
    return RiskModel(
        sigma=sigma,
        conn=conn,
        mu=window.returns.mean(axis=0),
        labels=panel.labels,
        tci=tci,
        window_end=window_end,
        fevd=fevd,
    )


def _check_config(panel: ReturnPanel, config: EstimationConfig) -> None:
    if config.window < panel.n + 2:
        raise InsufficientDataError(
            f"window {config.window} is shorter than N + 2 = {panel.n + 2}"
        )


def estimate_model(
    panel: ReturnPanel,
    at: str | pd.Timestamp | None = None,
    config: EstimationConfig | None = None,
) -> RiskModel:
    """Estimate Sigma, C and mu on the window ending at `at`.

    Args:
        panel: The return panel.
        at: Last date of the window; the latest date on or before it is used.
            Defaults to the last date of the panel.
        config: Estimation parameters.

    Returns:
        The estimated risk model, carrying its TCI, window end and FEVD.

    Raises:
        InsufficientDataError: If the window does not fit into the panel.
        EstimationError: If any component estimator fails.
    """
    config = config or EstimationConfig()
    _check_config(panel, config)
    if at is None:
        end = panel.t - 1
    else:
        end = int(panel.dates.searchsorted(pd.Timestamp(at), side="right")) - 1
        if end < 0:
            raise InsufficientDataError(f"insufficient observations: no data on or before {at}")
    return _estimate_window(panel, end, config)


def rolling_models(
    panel: ReturnPanel,
    config: EstimationConfig | None = None,
    step: int = 1,
    workers: int | None = None,
) -> list[RiskModel]:
    """Estimate a model for every `step`-th complete window, in date order.

    The result does not depend on the number of workers.
    """
    config = config or EstimationConfig()
    _check_config(panel, config)
    if step < 1:
        raise InputError(f"step must be at least 1, got {step}")
    ends = list(range(config.window - 1, panel.t, step))
    if not ends:
        raise InsufficientDataError(
            f"insufficient observations: window {config.window}, {panel.t} rows"
        )
    workers = resolve_workers(workers)
    logger.info("Estimating %d windows with %d worker(s).", len(ends), workers)
    if workers == 1:
        return [_estimate_window(panel, end, config) for end in ends]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda end: _estimate_window(panel, end, config), ends))


__all__ = [
    "Connectedness",
    "EstimationConfig",
    "EstimationError",
    "InsufficientDataError",
    "ReturnPanel",
    "VarFit",
    "connectedness_matrix",
    "estimate_model",
    "fit_var1",
    "generalized_fevd",
    "rolling_models",
    "shrink_covariance",
    "spillover_table",
]
