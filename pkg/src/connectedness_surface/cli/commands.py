"""The operations behind each CLI subcommand.

Implements:
- `cmd_estimate`, `cmd_synth`: return panels in, model documents or panels out.
- `cmd_solve`, `cmd_frontier`, `cmd_surface`: single solves and sweeps.
- `cmd_betas`, `cmd_decompose`, `cmd_scan`: analytics tables.
- `cmd_check`: numerical diagnostics of the trade-off identities.
- `COMMANDS`: subcommand name to operation.
"""

from __future__ import annotations

import logging
import math
import sys
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from connectedness_surface.analytics import (
    RankDeficiencyError,
    corner_funds,
    separation_scan,
    three_fund_decompose,
    top_betas,
)
from connectedness_surface.cli.templates import (
    CHECK_REPORT,
    DECOMPOSE_SUMMARY,
    ESTIMATE_SUMMARY,
    SURFACE_SUMMARY,
)
from connectedness_surface.estimation import (
    EstimationConfig,
    estimate_model,
    rolling_models,
    spillover_table,
)
from connectedness_surface.qp import certify, solve_with_return_target
from connectedness_surface.riskmodel import detect_degenerate, hybrid_matrix
from connectedness_surface.serialize import (
    model_to_dict,
    output_paths,
    read_model_json,
    read_returns_csv,
    report_to_dict,
    scan_to_frame,
    surface_to_dict,
    surface_to_frame,
    write_frame_csv,
    write_json,
    write_returns_csv,
)
from connectedness_surface.surface import (
    CommutationError,
    analytic_risk_curves,
    default_lambda_grid,
    default_mu0_grid,
    envelope_curve,
    full_surface,
    parse_grid,
    risk_risk_frontier,
    tradeoff_check,
)
from connectedness_surface.synth import generate_panel
from connectedness_surface.utils import InputError

if TYPE_CHECKING:
    from collections.abc import Callable

    from connectedness_surface.cli.cli import RunConfig
    from connectedness_surface.riskmodel import Portfolio, RiskModel
    from connectedness_surface.surface import Surface

logger = logging.getLogger("connectedness_surface")

# Bounds applied by `check`.
IDENTITY_TOL = 1e-4
SLOPE_TOL = 1e-3
ANALYTIC_TOL = 1e-9
CONCAVITY_TOL = 1e-9
# Derivatives below this count as vanishing.
DERIVATIVE_FLOOR = 1e-8


class CheckRow(NamedTuple):
    """One line of the trade-off table."""

    lam: float
    dsigma2: float
    dkappa: float
    identity_residual: float
    slope_error: str


def _emit(text: str) -> None:
    sys.stdout.write(text.rstrip("\n") + "\n")


def _require(path: Path | None, flag: str) -> Path:
    if path is None:
        raise InputError(f"This command needs {flag}.")
    return path


def _lambda_grid(conf: RunConfig) -> tuple[float, ...]:
    return default_lambda_grid() if conf.lambda_grid is None else parse_grid(conf.lambda_grid)


def _estimation_config(conf: RunConfig) -> EstimationConfig:
    if conf.shrinkage == "auto":
        return EstimationConfig(conf.window, conf.horizon, "auto")
    try:
        shrinkage = float(conf.shrinkage)
    except ValueError as err:
        raise InputError(
            f"--shrinkage must be a number or 'auto', got {conf.shrinkage!r}"
        ) from err
    return EstimationConfig(conf.window, conf.horizon, shrinkage)


def _optimum(model: RiskModel, conf: RunConfig) -> Portfolio:
    mu0 = -math.inf if conf.mu0 is None else conf.mu0
    return solve_with_return_target(
        model, conf.lam, mu0, long_only=conf.long_only, tol=conf.tol, regularize=True
    ).weights


def cmd_estimate(conf: RunConfig) -> int:
    """Estimate one model (or one per rolling window) from a return CSV."""
    panel = read_returns_csv(_require(conf.input, "--input"))
    output = _require(conf.output, "--output")
    config = _estimation_config(conf)
    if conf.rolling is not None:
        models = rolling_models(panel, config, step=conf.rolling, workers=conf.workers)
        write_json([model_to_dict(model) for model in models], output)
        spillovers = None
    else:
        model = estimate_model(panel, at=conf.at, config=config)
        models = [model]
        write_json(model_to_dict(model), output)
        spillovers = spillover_table(np.asarray(model.fevd), model.labels)
    _emit(
        ESTIMATE_SUMMARY.render(
            count=len(models),
            n=panel.n,
            window=config.window,
            horizon=config.fevd_horizon,
            models=models,
            spillovers=spillovers,
            output=output,
        )
    )
    return 0


def cmd_solve(conf: RunConfig) -> int:
    """Solve one (lambda, mu0) problem and write the report with its multipliers."""
    model = read_model_json(_require(conf.input, "--input"))
    mu0 = -math.inf if conf.mu0 is None else conf.mu0
    report = solve_with_return_target(
        model, conf.lam, mu0, long_only=conf.long_only, tol=conf.tol, regularize=True
    )
    certify(
        report, hybrid_matrix(model, conf.lam), model.mu, mu0, tolerances=model.tolerances
    )
    output = _require(conf.output, "--output")
    write_json(report_to_dict(report, model, conf.lam, conf.mu0), output)
    logger.info(
        "Solved lambda = %s in %d iteration(s), active set %s.",
        conf.lam,
        report.iterations,
        list(report.active_set),
    )
    return 0


def _write_surface(surface: Surface, model: RiskModel, conf: RunConfig, kind: str) -> None:
    csv_path, json_path = output_paths(_require(conf.output, "--output"))
    write_frame_csv(surface_to_frame(surface), csv_path)
    write_json(surface_to_dict(surface), json_path)
    rows, columns = surface.shape
    endpoints = [surface.point(0, 0), surface.point(0, columns - 1)]
    if rows > 1:
        endpoints += [surface.point(rows - 1, 0), surface.point(rows - 1, columns - 1)]
    _emit(
        SURFACE_SUMMARY.render(
            kind=kind,
            rows=rows,
            columns=columns,
            long_only=surface.long_only,
            infeasible=surface.infeasible_count,
            degenerate=detect_degenerate(model),
            endpoints=[point for point in endpoints if point.status == "ok"],
            csv_path=csv_path,
            json_path=json_path,
        )
    )


def cmd_frontier(conf: RunConfig) -> int:
    """Trace the risk-risk frontier over the lambda grid."""
    model = read_model_json(_require(conf.input, "--input"))
    surface = risk_risk_frontier(
        model, _lambda_grid(conf), conf.long_only, conf.workers, conf.tol
    )
    _write_surface(surface, model, conf, "frontier")
    return 0


def cmd_surface(conf: RunConfig) -> int:
    """Sweep the (mu0, lambda) grid; without --mu0-grid this is the frontier."""
    model = read_model_json(_require(conf.input, "--input"))
    lambdas = _lambda_grid(conf)
    if conf.mu0_grid is None:
        surface = risk_risk_frontier(model, lambdas, conf.long_only, conf.workers, conf.tol)
    else:
        targets = (
            default_mu0_grid(model) if conf.mu0_grid == "auto" else parse_grid(conf.mu0_grid)
        )
        surface = full_surface(
            model, targets, lambdas, conf.long_only, conf.workers, conf.tol
        )
    _write_surface(surface, model, conf, "surface")
    return 0


def cmd_betas(conf: RunConfig) -> int:
    """Write the top connectedness betas of the optimum at --lambda."""
    model = read_model_json(_require(conf.input, "--input"))
    frame = top_betas(model, _optimum(model, conf), k=conf.top)
    write_frame_csv(frame, _require(conf.output, "--output"))
    return 0


def cmd_decompose(conf: RunConfig) -> int:
    """Decompose the short-sale optimum at --lambda on the corner funds."""
    model = read_model_json(_require(conf.input, "--input"))
    funds = corner_funds(model)
    weights = solve_with_return_target(model, conf.lam, -math.inf, regularize=True).weights
    decomposition = three_fund_decompose(funds, weights, model.tolerances)
    doc = {
        "lambda": conf.lam,
        "labels": list(model.labels),
        "weights": [float(x) for x in weights.weights],
        "funds": {name: [float(x) for x in fund.weights] for name, fund in funds._asdict().items()},
        "alphas": list(decomposition.alphas),
        "convex": decomposition.convex,
        "residual": decomposition.residual,
        "representable": decomposition.representable,
    }
    if conf.output is not None:
        write_json(doc, conf.output)
    _emit(
        DECOMPOSE_SUMMARY.render(
            lam=conf.lam,
            weights=", ".join(f"{x:.4f}" for x in weights.weights),
            alphas=", ".join(f"{x:.4f}" for x in decomposition.alphas),
            convex=decomposition.convex,
            representable=decomposition.representable,
            residual=decomposition.residual,
        )
    )
    return 0


def cmd_scan(conf: RunConfig) -> int:
    """Write the barycentric decomposition for every grid lambda."""
    model = read_model_json(_require(conf.input, "--input"))
    scan = separation_scan(model, _lambda_grid(conf))
    write_frame_csv(scan_to_frame(scan), _require(conf.output, "--output"))
    if scan.all_convex:
        logger.info("Every optimum lies in the corner-fund hull.")
    else:
        logger.info("Optimum leaves the corner-fund hull at lambda = %s.", scan.violations)
    return 0


def _tradeoff_rows(
    model: RiskModel, grid: tuple[float, ...], h: float
) -> tuple[list[CheckRow], list[str]]:
    rows, violations = [], []
    for lam in grid:
        if not h < lam < 1.0 - h:
            continue
        result = tradeoff_check(model, lam, h)
        scale = abs(result.dsigma2) + abs(result.dkappa)
        if abs(result.identity_residual) > IDENTITY_TOL * scale + DERIVATIVE_FLOOR:
            violations.append(
                f"lambda = {lam}: identity residual {result.identity_residual:.3g}"
            )
        if math.isnan(result.slope) or abs(result.dkappa) <= DERIVATIVE_FLOOR:
            slope_error = "n/a"
        else:
            error = abs(result.slope / result.expected_slope - 1.0)
            slope_error = f"{error:.3g}"
            if error > SLOPE_TOL:
                violations.append(f"lambda = {lam}: slope off by {error:.3g} (relative)")
        rows.append(
            CheckRow(lam, result.dsigma2, result.dkappa, result.identity_residual, slope_error)
        )
    return rows, violations


def cmd_check(conf: RunConfig) -> int:
    """Run the numerical diagnostics; exit 4 when an identity fails.

    A corner-fund hull exit is reported but is not a failure.
    """
    model = read_model_json(_require(conf.input, "--input"))
    grid = _lambda_grid(conf)
    rows, violations = _tradeoff_rows(model, grid, conf.h)

    analytic, analytic_note = None, ""
    try:
        curves = analytic_risk_curves(model, grid)
    except CommutationError as err:
        analytic_note = str(err)
    else:
        analytic = max(
            abs(c.lam * c.dsigma2 + (1.0 - c.lam) * c.dkappa) for c in curves
        )
        if analytic > ANALYTIC_TOL:
            violations.append(f"analytic identity residual {analytic:.3g}")

    envelope = 0.0
    if len(grid) >= 3:  # noqa: PLR2004
        curve = envelope_curve(model, grid)
        envelope = float(curve.second_differences.max())
        if envelope > CONCAVITY_TOL:
            violations.append(f"envelope second difference {envelope:.3g} > 0")

    scan, scan_note = None, ""
    try:
        scan = separation_scan(model, grid)
    except RankDeficiencyError as err:
        scan_note = str(err)

    report = CHECK_REPORT.render(
        h=conf.h,
        tradeoff=rows,
        analytic=analytic,
        analytic_note=analytic_note,
        envelope=envelope,
        scan=scan,
        scan_note=scan_note,
        violations=violations,
    )
    _emit(report)
    if conf.output is not None:
        Path(conf.output).write_text(report.rstrip("\n") + "\n", encoding="utf-8")
    return 4 if violations else 0


def cmd_synth(conf: RunConfig) -> int:
    """Write a synthetic return panel."""
    if conf.seed is None:
        raise InputError("synth needs --seed.")
    panel = generate_panel(conf.seed, conf.n, conf.t, conf.regime)
    output = _require(conf.output, "--output")
    write_returns_csv(panel, output)
    logger.info("Wrote %d x %d %s returns to %s.", panel.t, panel.n, conf.regime, output)
    return 0


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "estimate": cmd_estimate,
    "solve": cmd_solve,
    "frontier": cmd_frontier,
    "surface": cmd_surface,
    "betas": cmd_betas,
    "decompose": cmd_decompose,
    "scan": cmd_scan,
    "check": cmd_check,
    "synth": cmd_synth,
}

__all__ = [
    "COMMANDS",
    "cmd_betas",
    "cmd_check",
    "cmd_decompose",
    "cmd_estimate",
    "cmd_frontier",
    "cmd_scan",
    "cmd_solve",
    "cmd_surface",
    "cmd_synth",
]
