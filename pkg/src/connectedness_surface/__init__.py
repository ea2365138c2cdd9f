"""Portfolio selection on variance, connectedness risk and expected return."""

from __future__ import annotations

from connectedness_surface.analytics import (
    CornerFunds,
    FundDecomposition,
    RankDeficiencyError,
    SeparationScan,
    connectedness_betas,
    corner_funds,
    long_only_cost,
    separation_scan,
    three_fund_decompose,
    top_betas,
)
from connectedness_surface.estimation import (
    EstimationConfig,
    EstimationError,
    InsufficientDataError,
    ReturnPanel,
    connectedness_matrix,
    estimate_model,
    fit_var1,
    generalized_fevd,
    rolling_models,
    shrink_covariance,
    spillover_table,
)
from connectedness_surface.qp import (
    InfeasibleTargetError,
    IterationLimitError,
    NotPositiveDefiniteError,
    SolveReport,
    SolverError,
    certify,
    check_kkt,
    solve_closed_form,
    solve_long_only,
    solve_with_return_target,
)
from connectedness_surface.riskmodel import (
    DimensionError,
    HybridMatrix,
    ModelValidationError,
    Portfolio,
    RiskModel,
    detect_degenerate,
    evaluate_loss,
    hybrid_matrix,
    portfolio_risks,
)
from connectedness_surface.serialize import (
    PanelFormatError,
    SchemaError,
    model_from_dict,
    model_to_dict,
    read_model_json,
    read_returns_csv,
)
from connectedness_surface.surface import (
    CommutationError,
    Surface,
    SurfacePoint,
    SweepError,
    analytic_risk_curves,
    eigenbasis_weights,
    envelope_curve,
    full_surface,
    risk_risk_frontier,
    tradeoff_check,
)
from connectedness_surface.synth import generate_panel
from connectedness_surface.utils import (
    DEFAULT_TOLERANCES,
    ComputationError,
    InputError,
    InvariantViolation,
    SurfaceError,
    Tolerances,
)

__all__ = [
    "DEFAULT_TOLERANCES",
    "CommutationError",
    "ComputationError",
    "CornerFunds",
    "DimensionError",
    "EstimationConfig",
    "EstimationError",
    "FundDecomposition",
    "HybridMatrix",
    "InfeasibleTargetError",
    "InputError",
    "InsufficientDataError",
    "InvariantViolation",
    "IterationLimitError",
    "ModelValidationError",
    "NotPositiveDefiniteError",
    "PanelFormatError",
    "Portfolio",
    "RankDeficiencyError",
    "ReturnPanel",
    "RiskModel",
    "SchemaError",
    "SeparationScan",
    "SolveReport",
    "SolverError",
    "Surface",
    "SurfaceError",
    "SurfacePoint",
    "SweepError",
    "Tolerances",
    "analytic_risk_curves",
    "certify",
    "check_kkt",
    "connectedness_betas",
    "connectedness_matrix",
    "corner_funds",
    "detect_degenerate",
    "eigenbasis_weights",
    "envelope_curve",
    "estimate_model",
    "evaluate_loss",
    "fit_var1",
    "full_surface",
    "generalized_fevd",
    "generate_panel",
    "hybrid_matrix",
    "long_only_cost",
    "model_from_dict",
    "model_to_dict",
    "portfolio_risks",
    "read_model_json",
    "read_returns_csv",
    "risk_risk_frontier",
    "rolling_models",
    "separation_scan",
    "shrink_covariance",
    "solve_closed_form",
    "solve_long_only",
    "solve_with_return_target",
    "spillover_table",
    "three_fund_decompose",
    "top_betas",
    "tradeoff_check",
]
