# %%
"""Tests for the closed-form, active-set and return-target solvers."""

from __future__ import annotations

import dataclasses
import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from connectedness_surface.qp import (
    InfeasibleTargetError,
    IterationLimitError,
    NotPositiveDefiniteError,
    certify,
    check_kkt,
    solve_closed_form,
    solve_long_only,
    solve_with_return_target,
)
from connectedness_surface.riskmodel import HybridMatrix, RiskModel, hybrid_matrix
from connectedness_surface.utils import InputError, InvariantViolation, Tolerances
from tests.conftest import random_model

if TYPE_CHECKING:
    from connectedness_surface.utils import FloatArray


def brute_force_minimum(matrix: FloatArray, step: float = 0.004) -> float:
    """Minimum of w^T M w over a regular grid on the 3-asset simplex."""
    count = round(1 / step)
    i, j = np.meshgrid(np.arange(count + 1), np.arange(count + 1), indexing="ij")
    mask = i + j <= count
    w = np.column_stack([i[mask] / count, j[mask] / count, 1.0 - (i[mask] + j[mask]) / count])
    return float(np.einsum("ki,ij,kj->k", w, matrix, w).min())


def test_closed_form_worked_example(model_a: RiskModel) -> None:
    m = hybrid_matrix(model_a, 1.0)
    report = solve_closed_form(m)
    np.testing.assert_allclose(report.weights.weights, [0.4110, 0.7271, -0.1381], atol=1e-3)
    assert report.objective == pytest.approx(0.03354, abs=5e-4)
    assert report.nu == pytest.approx(2 * report.objective)
    assert report.active_set == ()
    certify(report, m)


def test_long_only_worked_example(model_a: RiskModel) -> None:
    m = hybrid_matrix(model_a, 1.0)
    report = solve_long_only(m)
    np.testing.assert_allclose(report.weights.weights, [0.4005, 0.5995, 0.0], atol=1e-3)
    assert report.objective == pytest.approx(0.03731, abs=5e-4)
    assert report.active_set == (2,)
    assert report.gamma[2] > 0
    assert report.releases == 0
    certify(report, m)
    delta = report.objective - solve_closed_form(m).objective
    assert delta == pytest.approx(0.0038, abs=5e-4)


def test_hybrid_optimum_worked_example(model_c: RiskModel) -> None:
    report = solve_with_return_target(model_c, 0.4, -1.0)
    np.testing.assert_allclose(report.weights.weights, [0.3378, 0.3804, 0.2818], atol=1e-3)
    assert report.theta == 0.0


def test_identity_gives_equal_weights() -> None:
    m = HybridMatrix(0.5, np.eye(4))
    np.testing.assert_allclose(solve_closed_form(m).weights.weights, 0.25, atol=1e-15)
    np.testing.assert_allclose(solve_long_only(m).weights.weights, 0.25, atol=1e-12)


def test_indefinite_matrix() -> None:
    m = HybridMatrix(0.5, np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefiniteError, match="indefinite"):
        solve_closed_form(m)
    with pytest.raises(NotPositiveDefiniteError, match="indefinite"):
        solve_long_only(m)


def test_psd_tolerance_comes_from_the_matrix() -> None:
    loose = HybridMatrix(0.5, np.diag([1.0, -1e-6]), Tolerances(psd=1e-3))
    with pytest.raises(NotPositiveDefiniteError, match="singular"):
        solve_closed_form(loose)
    with pytest.raises(NotPositiveDefiniteError, match="indefinite"):
        solve_closed_form(HybridMatrix(0.5, np.diag([1.0, -1e-6])))


def test_singular_matrix_regularization() -> None:
    model = RiskModel(sigma=np.eye(3), conn=np.diag([1.0, 1.0, 0.0]), mu=np.zeros(3))
    m = hybrid_matrix(model, 0.0)
    with pytest.raises(NotPositiveDefiniteError, match="singular"):
        solve_closed_form(m)
    report = solve_closed_form(m, regularize=True)
    assert report.regularized
    assert report.ridge == pytest.approx(2e-12 / 3)
    np.testing.assert_allclose(report.weights.weights, [0.0, 0.0, 1.0], atol=1e-9)
    certify(report, m)
    long_only = solve_long_only(m)
    assert long_only.regularized
    np.testing.assert_allclose(long_only.weights.weights, [0.0, 0.0, 1.0], atol=1e-9)


def test_iteration_limit(model_a: RiskModel) -> None:
    with pytest.raises(IterationLimitError):
        solve_long_only(hybrid_matrix(model_a, 1.0), max_iter=1)


def test_invalid_tolerance(model_a: RiskModel) -> None:
    with pytest.raises(InputError, match="tol"):
        solve_long_only(hybrid_matrix(model_a, 1.0), tol=0.0)


@pytest.mark.parametrize("seed", range(50))
def test_long_only_kkt_certificates(seed: int) -> None:
    rng = np.random.default_rng(1000 + seed)
    model = random_model(seed, int(rng.integers(3, 9)))
    m = hybrid_matrix(model, float(rng.uniform()))
    report = solve_long_only(m)
    residuals = check_kkt(report, m)
    assert residuals.stationarity <= 1e-7
    assert residuals.slackness <= 1e-9
    assert residuals.dual >= -1e-9
    assert report.weights.weights.min() >= 0.0
    assert report.objective >= solve_closed_form(m).objective - 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_long_only_matches_brute_force(seed: int) -> None:
    step = 0.004
    model = random_model(200 + seed, 3)
    m = hybrid_matrix(model, seed / 19)
    report = solve_long_only(m)
    bound = brute_force_minimum(m.matrix, step) + 2 * step**2 * np.linalg.norm(m.matrix, 2)
    assert report.objective <= bound


def test_slack_target_matches_unconstrained(model_c: RiskModel) -> None:
    with_target = solve_with_return_target(model_c, 0.4, 0.0)
    without = solve_closed_form(hybrid_matrix(model_c, 0.4))
    np.testing.assert_allclose(with_target.weights.weights, without.weights.weights)


def test_binding_target_short_sales(model_c: RiskModel) -> None:
    mu0 = 0.095
    report = solve_with_return_target(model_c, 0.4, mu0)
    assert float(report.weights.weights @ model_c.mu) == pytest.approx(mu0, abs=1e-10)
    assert report.theta > 0
    certify(report, hybrid_matrix(model_c, 0.4), model_c.mu, mu0)


@pytest.mark.parametrize("seed", range(10))
def test_binding_target_long_only(seed: int) -> None:
    model = random_model(300 + seed, 5)
    lam = 0.5
    m = hybrid_matrix(model, lam)
    unconstrained = solve_long_only(m).weights.weights @ model.mu
    mu0 = 0.5 * (float(unconstrained) + float(model.mu.max()))
    report = solve_with_return_target(model, lam, mu0, long_only=True)
    assert float(report.weights.weights @ model.mu) >= mu0 - 1e-9
    assert report.weights.weights.min() >= 0.0
    assert report.theta >= 0.0
    certify(report, m, model.mu, mu0)


def test_unique_feasible_point() -> None:
    model = RiskModel(sigma=np.eye(2), conn=np.eye(2), mu=np.array([0.1, 0.2]))
    for lam in (0.0, 0.5, 1.0):
        report = solve_with_return_target(model, lam, 0.2, long_only=True)
        np.testing.assert_allclose(report.weights.weights, [0.0, 1.0], atol=1e-12)
        assert type(report.theta) is float
        assert type(report.nu) is float
        certify(report, hybrid_matrix(model, lam), model.mu, 0.2)


def test_infeasible_targets(model_c: RiskModel) -> None:
    with pytest.raises(InfeasibleTargetError):
        solve_with_return_target(model_c, 0.5, 0.2, long_only=True)
    flat = RiskModel(sigma=np.eye(2), conn=np.eye(2), mu=np.array([0.1, 0.1]))
    with pytest.raises(InfeasibleTargetError):
        solve_with_return_target(flat, 0.5, 0.2)
    with pytest.raises(InputError, match="mu0"):
        solve_with_return_target(model_c, 0.5, math.nan)


def test_certify_rejects_perturbed_report(model_a: RiskModel) -> None:
    m = hybrid_matrix(model_a, 1.0)
    report = solve_closed_form(m)
    bad = dataclasses.replace(report, nu=report.nu + 1e-3)
    with pytest.raises(InvariantViolation, match="KKT"):
        certify(bad, m)


@pytest.mark.parametrize("long_only", [False, True])
@pytest.mark.parametrize("seed", range(10))
def test_solution_is_permutation_invariant(seed: int, long_only: bool) -> None:
    model = random_model(400 + seed, 5)
    order = np.random.default_rng(seed).permutation(model.n)
    reordered = model.reordered(order)
    solve = solve_long_only if long_only else solve_closed_form
    for lam in (0.0, 0.3, 1.0):
        original = solve(hybrid_matrix(model, lam)).weights.weights
        permuted = solve(hybrid_matrix(reordered, lam)).weights.weights
        np.testing.assert_allclose(permuted, original[order], atol=1e-9)


@pytest.mark.parametrize("long_only", [False, True])
@pytest.mark.parametrize("seed", range(5))
def test_weights_are_continuous_in_lambda(seed: int, long_only: bool) -> None:
    """Steps of 0.01 in lambda move the optimum by at most K * 0.01.

    On every face dw/dlambda = -(I - w 1^T) M_FF^{-1} (Sigma - C)_FF w, and the smallest
    eigenvalue of M_lambda is at least min(eig_min(Sigma), eig_min(C)).
    """
    model = random_model(500 + seed, 5)
    solve = solve_long_only if long_only else solve_closed_form
    grid = np.linspace(0.0, 1.0, 101)
    weights = np.array([solve(hybrid_matrix(model, lam)).weights.weights for lam in grid])
    floor = min(np.linalg.eigvalsh(model.sigma)[0], np.linalg.eigvalsh(model.conn)[0])
    spread = np.linalg.norm(model.sigma - model.conn, 2)
    size = float(np.linalg.norm(weights, axis=1).max())
    bound = 1.5 * (1.0 + math.sqrt(model.n) * size) * spread * size / floor
    steps = np.linalg.norm(np.diff(weights, axis=0), axis=1)
    assert steps.max() <= bound * 0.01
    assert steps.max() > 0.0
