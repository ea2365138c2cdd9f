"""File formats: return panels, model documents, surfaces and analytics tables.

Implements:
- `read_returns_csv`, `write_returns_csv`: date-indexed return panels.
- `model_to_dict`, `model_from_dict`, `read_model_json`, `write_json`: model documents.
- `surface_to_frame`, `surface_to_dict`, `surface_from_dict`: surface serializations.
- `scan_to_frame`, `report_to_dict`: analytics and single-solve outputs.
- `output_paths`: the CSV/JSON pair written for an output stem.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd

from connectedness_surface.estimation import ReturnPanel
from connectedness_surface.riskmodel import Portfolio, RiskModel, portfolio_risks
from connectedness_surface.surface import Surface, SurfacePoint
from connectedness_surface.utils import SCHEMA_VERSION, InputError

if TYPE_CHECKING:
    from connectedness_surface.analytics import SeparationScan
    from connectedness_surface.qp import SolveReport
    from connectedness_surface.utils import StrPath

logger = logging.getLogger("connectedness_surface")

CSV_FLOAT_FORMAT = "%.10g"
OUTPUT_SUFFIXES = {".csv", ".json"}


class PanelFormatError(InputError):
    """A return CSV cannot be parsed."""


class SchemaError(InputError):
    """A JSON document does not follow the expected schema."""


def output_paths(stem: StrPath) -> tuple[Path, Path]:
    """Return the (CSV, JSON) paths for `stem`, dropping a trailing .csv or .json."""
    path = Path(stem)
    if path.suffix in OUTPUT_SUFFIXES:
        path = path.with_suffix("")
    return path.with_name(path.name + ".csv"), path.with_name(path.name + ".json")


def read_returns_csv(path: StrPath) -> ReturnPanel:
    """Read a CSV with a date column followed by one return column per asset.

    Args:
        path: The CSV file; dates are ISO 8601.

    Returns:
        The return panel.

    Raises:
        PanelFormatError: For blank or non-numeric cells and unparseable dates; the message
            names the file row (the header is row 1) and column.
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as err:
        raise PanelFormatError(f"{path}: {err}") from err
    if raw.shape[1] < 2:  # noqa: PLR2004
        raise PanelFormatError(f"{path}: expected a date column and at least one asset.")
    if raw.empty:
        raise PanelFormatError(f"{path}: no observations.")

    date_column, *labels = raw.columns
    values = np.empty((len(raw), len(labels)))
    for j, label in enumerate(labels):
        cells = raw[label].str.strip()
        blank = np.flatnonzero(cells.eq("").to_numpy())
        if blank.size:
            raise PanelFormatError(f"{path}: row {blank[0] + 2}, column {label!r}: blank cell")
        numbers = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(numbers))
        if bad.size:
            row = int(bad[0])
            raise PanelFormatError(
                f"{path}: row {row + 2}, column {label!r}: invalid number {cells.iloc[row]!r}"
            )
        values[:, j] = numbers

    try:
        dates = pd.DatetimeIndex(pd.to_datetime(raw[date_column], format="ISO8601"))
    except (ValueError, TypeError) as err:
        raise PanelFormatError(f"{path}: column {date_column!r}: {err}") from err
    missing = np.flatnonzero(dates.isna())
    if missing.size:
        raise PanelFormatError(f"{path}: row {missing[0] + 2}, column {date_column!r}: blank date")
    if dates.has_duplicates or not dates.is_monotonic_increasing:
        position = next(
            i for i in range(1, len(dates)) if dates[i] <= dates[i - 1]
        )
        raise PanelFormatError(f"{path}: row {position + 2}: dates must be strictly increasing")
    logger.debug("Read %d x %d returns from %s.", len(dates), len(labels), path)
    return ReturnPanel(dates=dates, returns=values, labels=tuple(labels))


def write_returns_csv(panel: ReturnPanel, path: StrPath) -> None:
    """Write `panel` with ISO dates and ten significant digits."""
    panel.to_frame().to_csv(
        path, float_format=CSV_FLOAT_FORMAT, date_format="%Y-%m-%d", lineterminator="\n"
    )


def _matrix(values: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in values]


def _finite_or_none(value: float) -> float | None:
    return None if math.isnan(value) else float(value)


def _nan_if_none(value: float | None) -> float:
    return math.nan if value is None else float(value)


def model_to_dict(model: RiskModel) -> dict[str, Any]:
    """The model as a schema-1 JSON document."""
    return {
        "schema": SCHEMA_VERSION,
        "n": model.n,
        "labels": list(model.labels),
        "mu": [float(x) for x in model.mu],
        "sigma": _matrix(model.sigma),
        "conn": _matrix(model.conn),
        "tci": model.tci,
        "window_end": model.window_end,
        "fevd": None if model.fevd is None else _matrix(model.fevd),
    }


def _check_schema(doc: Any, required: tuple[str, ...], kind: str) -> dict[str, Any]:  # noqa: ANN401
    if not isinstance(doc, dict):
        raise SchemaError(f"A {kind} document must be a JSON object.")
    if doc.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"Unsupported {kind} schema {doc.get('schema')!r}.")
    missing = [key for key in required if key not in doc]
    if missing:
        raise SchemaError(f"The {kind} document lacks {', '.join(missing)}.")
    return doc


def model_from_dict(doc: Any) -> RiskModel:  # noqa: ANN401
    """Rebuild and validate a model from its JSON document.

    Raises:
        SchemaError: If keys are missing or the schema version differs.
        ModelValidationError: If the matrices are invalid.
    """
    doc = _check_schema(doc, ("schema", "labels", "mu", "sigma", "conn"), "model")
    try:
        model = RiskModel(
            sigma=np.array(doc["sigma"], dtype=np.float64),
            conn=np.array(doc["conn"], dtype=np.float64),
            mu=np.array(doc["mu"], dtype=np.float64),
            labels=tuple(doc["labels"]),
            tci=doc.get("tci"),
            window_end=doc.get("window_end"),
            fevd=None if doc.get("fevd") is None else np.array(doc["fevd"], dtype=np.float64),
        )
    except InputError:
        raise
    except (TypeError, ValueError) as err:
        raise SchemaError(f"Malformed model document: {err}") from err
    if "n" in doc and doc["n"] != model.n:
        raise SchemaError(f"Model document declares n = {doc['n']} but has {model.n} assets.")
    return model


def read_json(path: StrPath) -> Any:  # noqa: ANN401
    """Load a JSON document."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: {err}") from err


def read_model_json(path: StrPath) -> RiskModel:
    """Read one model document."""
    return model_from_dict(read_json(path))


def write_json(doc: Any, path: StrPath) -> None:  # noqa: ANN401
    """Write `doc` with shortest round-trip floats and a trailing newline."""
    text = json.dumps(doc, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def surface_to_frame(surface: Surface) -> pd.DataFrame:
    """One row per cell: mu0, lambda, risks, binding flag, weights and status."""
    n = len(surface.labels)
    rows = []
    for point in surface.points:
        weights = point.weights.weights if point.weights is not None else np.full(n, np.nan)
        rows.append(
            [
                np.nan if point.mu0 is None else point.mu0,
                point.lam,
                point.expected_return,
                point.variance,
                point.connectedness,
                int(point.binding_return),
                *weights,
                point.status,
            ]
        )
    columns = [
        "mu0",
        "lambda",
        "exp_return",
        "variance",
        "connectedness",
        "binding",
        *(f"w_{i + 1}" for i in range(n)),
        "status",
    ]
    return pd.DataFrame(rows, columns=columns)


def write_frame_csv(frame: pd.DataFrame, path: StrPath) -> None:
    """Write a table with ten significant digits and Unix line endings."""
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def _point_to_dict(point: SurfacePoint) -> dict[str, Any]:
    return {
        "lambda": point.lam,
        "mu0": point.mu0,
        "status": point.status,
        "exp_return": _finite_or_none(point.expected_return),
        "variance": _finite_or_none(point.variance),
        "connectedness": _finite_or_none(point.connectedness),
        "binding": point.binding_return,
        "weights": None if point.weights is None else [float(x) for x in point.weights.weights],
    }


def surface_to_dict(surface: Surface) -> dict[str, Any]:
    """The surface as a nested grid: one list of cells per mu0 row."""
    rows, columns = surface.shape
    return {
        "schema": SCHEMA_VERSION,
        "model_fingerprint": surface.model_fingerprint,
        "labels": list(surface.labels),
        "long_only": surface.long_only,
        "lambda_grid": list(surface.lambda_grid),
        "mu0_grid": None if surface.mu0_grid is None else list(surface.mu0_grid),
        "grid": [
            [_point_to_dict(surface.point(i, j)) for j in range(columns)] for i in range(rows)
        ],
    }


def _point_from_dict(doc: dict[str, Any], long_only: bool) -> SurfacePoint:
    weights = doc["weights"]
    return SurfacePoint(
        lam=float(doc["lambda"]),
        mu0=None if doc["mu0"] is None else float(doc["mu0"]),
        expected_return=_nan_if_none(doc["exp_return"]),
        variance=_nan_if_none(doc["variance"]),
        connectedness=_nan_if_none(doc["connectedness"]),
        weights=None if weights is None else Portfolio(np.array(weights), long_only=long_only),
        binding_return=bool(doc["binding"]),
        status=doc["status"],
    )


def surface_from_dict(doc: Any) -> Surface:  # noqa: ANN401
    """Rebuild a surface from `surface_to_dict` output, bit for bit.

    Raises:
        SchemaError: If the document is malformed.
    """
    doc = _check_schema(
        doc,
        ("model_fingerprint", "labels", "long_only", "lambda_grid", "mu0_grid", "grid"),
        "surface",
    )
    long_only = bool(doc["long_only"])
    try:
        points = tuple(
            _point_from_dict(cell, long_only) for row in doc["grid"] for cell in row
        )
        mu0_grid = doc["mu0_grid"]
        return Surface(
            points=points,
            lambda_grid=tuple(float(x) for x in doc["lambda_grid"]),
            mu0_grid=None if mu0_grid is None else tuple(float(x) for x in mu0_grid),
            long_only=long_only,
            model_fingerprint=str(doc["model_fingerprint"]),
            labels=tuple(doc["labels"]),
        )
    except (KeyError, TypeError) as err:
        raise SchemaError(f"Malformed surface document: {err!r}") from err


def scan_to_frame(scan: SeparationScan) -> pd.DataFrame:
    """`lambda, alpha_mv, alpha_mc, alpha_max, convex, residual` per grid lambda."""
    rows = []
    for row in scan.rows:
        decomposition = row.decomposition
        rows.append(
            [row.lam, *decomposition.alphas, int(decomposition.convex), decomposition.residual]
        )
    return pd.DataFrame(
        rows, columns=["lambda", "alpha_mv", "alpha_mc", "alpha_max", "convex", "residual"]
    )


def report_to_dict(
    report: SolveReport, model: RiskModel, lam: float, mu0: float | None
) -> dict[str, Any]:
    """A single solve with its multipliers and risks."""
    risks = portfolio_risks(model, report.weights)
    return {
        "schema": SCHEMA_VERSION,
        "lambda": lam,
        "mu0": mu0,
        "labels": list(model.labels),
        "weights": [float(x) for x in report.weights.weights],
        "nu": report.nu,
        "theta": report.theta,
        "gamma": [float(x) for x in report.gamma],
        "active_set": list(report.active_set),
        "iterations": report.iterations,
        "releases": report.releases,
        "objective": report.objective,
        "regularized": report.regularized,
        "ridge": report.ridge,
        "exp_return": risks.expected_return,
        "variance": risks.variance,
        "connectedness": risks.connectedness,
    }


__all__ = [
    "CSV_FLOAT_FORMAT",
    "PanelFormatError",
    "SchemaError",
    "model_from_dict",
    "model_to_dict",
    "output_paths",
    "read_json",
    "read_model_json",
    "read_returns_csv",
    "report_to_dict",
    "scan_to_frame",
    "surface_from_dict",
    "surface_to_dict",
    "surface_to_frame",
    "write_frame_csv",
    "write_json",
    "write_returns_csv",
]
