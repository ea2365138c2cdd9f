# %%
"""Tests for connectedness betas, corner funds and the three-fund decomposition."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from connectedness_surface.analytics import (
    RankDeficiencyError,
    connectedness_betas,
    corner_funds,
    long_only_cost,
    separation_scan,
    three_fund_decompose,
    top_betas,
)
from connectedness_surface.qp import solve_closed_form
from connectedness_surface.riskmodel import DimensionError, Portfolio, RiskModel, hybrid_matrix
from connectedness_surface.utils import InputError
from tests.conftest import random_model

if TYPE_CHECKING:
    from connectedness_surface.utils import FloatArray


@pytest.fixture
def convex_model() -> RiskModel:
    """Diagonal pair whose hybrid optima stay on the segment between the risk corners."""
    return RiskModel(
        sigma=np.diag([1.0, 2.0, 2.0]),
        conn=np.diag([3.0, 1.0, 1.0]),
        mu=np.array([0.05, 0.06, 0.10]),
    )


def test_betas_add_up_to_connectedness() -> None:
    rng = np.random.default_rng(99)
    for seed in range(100):
        model = random_model(seed, int(rng.integers(2, 8)))
        p = Portfolio(rng.dirichlet(np.ones(model.n)))
        betas = connectedness_betas(model, p)
        total = 2.0 * float(p.weights @ model.conn @ p.weights)
        assert float(p.weights @ betas) == pytest.approx(total, rel=1e-12)


def test_betas_special_cases() -> None:
    p = Portfolio(np.array([0.2, 0.3, 0.5]))
    zero = RiskModel(sigma=np.eye(3), conn=np.zeros((3, 3)), mu=np.zeros(3))
    assert np.array_equal(connectedness_betas(zero, p), np.zeros(3))
    identity = RiskModel(sigma=np.eye(3), conn=np.eye(3), mu=np.zeros(3))
    np.testing.assert_allclose(connectedness_betas(identity, p), 2 * p.weights)
    with pytest.raises(DimensionError):
        connectedness_betas(identity, Portfolio.equal(2))


def test_betas_at_the_hybrid_optimum(model_c: RiskModel) -> None:
    weights = np.array([0.3378, 0.3804, 0.2818])
    betas = connectedness_betas(model_c, Portfolio(weights))
    np.testing.assert_allclose(betas, 2 * model_c.conn @ weights)
    assert float(weights @ betas) == pytest.approx(2 * weights @ model_c.conn @ weights)


def test_top_betas_order() -> None:
    model = RiskModel(
        sigma=np.eye(4),
        conn=np.diag([1.0, 3.0, 3.0, 2.0]),
        mu=np.zeros(4),
        labels=("a", "b", "c", "d"),
    )
    frame = top_betas(model, Portfolio.equal(4), k=3)
    assert list(frame.columns) == ["label", "beta"]
    assert frame["label"].tolist() == ["b", "c", "d"]
    np.testing.assert_allclose(frame["beta"], [1.5, 1.5, 1.0])
    assert len(top_betas(model, Portfolio.equal(4))) == 4
    with pytest.raises(InputError, match="k must be positive"):
        top_betas(model, Portfolio.equal(4), k=0)


def test_corner_funds_worked_example(model_c: RiskModel) -> None:
    funds = corner_funds(model_c)
    np.testing.assert_allclose(funds.mv.weights, [0.7321, 0.1429, 0.1250], atol=1e-3)
    np.testing.assert_allclose(funds.mc.weights, [0.1864, 0.2373, 0.5763], atol=1e-3)
    assert funds.maxmu.weights.tolist() == [0.0, 0.0, 1.0]


def test_long_only_corner_funds() -> None:
    funds = corner_funds(random_model(12, 6), long_only=True)
    for fund in funds:
        assert fund.weights.min() >= 0.0
        assert fund.weights.sum() == pytest.approx(1.0)


def test_proportional_model_is_rank_deficient(model_a: RiskModel) -> None:
    funds = corner_funds(model_a)
    with pytest.raises(RankDeficiencyError, match="affinely dependent"):
        three_fund_decompose(funds, funds.mv)


def test_decompose_corner_and_midpoint(model_c: RiskModel) -> None:
    funds = corner_funds(model_c)
    corner = three_fund_decompose(funds, funds.mv)
    np.testing.assert_allclose(corner.alphas, [1.0, 0.0, 0.0], atol=1e-10)
    assert corner.convex
    midpoint = Portfolio(0.5 * (funds.mv.weights + funds.mc.weights))
    halves = three_fund_decompose(funds, midpoint)
    np.testing.assert_allclose(halves.alphas, [0.5, 0.5, 0.0], atol=1e-10)
    assert halves.convex
    assert halves.representable


def test_decompose_worked_example(model_c: RiskModel) -> None:
    funds = corner_funds(model_c)
    optimum = solve_closed_form(hybrid_matrix(model_c, 0.4)).weights
    decomposition = three_fund_decompose(funds, optimum)
    np.testing.assert_allclose(decomposition.alphas, [0.063, 1.565, -0.628], atol=2e-2)
    assert not decomposition.convex
    assert decomposition.representable
    assert sum(decomposition.alphas) == pytest.approx(1.0, abs=1e-12)


def inside_triangle(corners: list[FloatArray], point: FloatArray) -> bool:
    """Edge-side sign test on the first two weights (the third is fixed by the budget)."""
    a, b, c = (corner[:2] for corner in corners)
    p = point[:2]

    def side(u: FloatArray, v: FloatArray) -> float:
        return float((v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]))

    signs = np.array([side(a, b), side(b, c), side(c, a)])
    return bool(np.all(signs >= -1e-12) or np.all(signs <= 1e-12))


@pytest.mark.parametrize("seed", range(10))
def test_points_inside_the_triangle(model_c: RiskModel, seed: int) -> None:
    funds = corner_funds(model_c)
    alphas = 0.05 + 0.85 * np.random.default_rng(seed).dirichlet(np.ones(3))
    target = Portfolio(np.column_stack([fund.weights for fund in funds]) @ alphas)
    decomposition = three_fund_decompose(funds, target)
    np.testing.assert_allclose(decomposition.alphas, alphas, atol=1e-9)
    assert decomposition.convex


@pytest.mark.parametrize(
    "alphas",
    [
        (0.2, 0.3, 0.5),
        (0.4, 0.6, 0.0),
        (0.0, 0.25, 0.75),
        (0.5, 0.0, 0.5),
        (0.0, 0.0, 1.0),
        (-0.2, 0.7, 0.5),
        (0.6, -0.1, 0.5),
        (0.3, 0.8, -0.1),
        (-0.01, 0.51, 0.5),
        (1.5, 0.2, -0.7),
    ],
)
def test_convex_flag_matches_sign_test(
    model_c: RiskModel, alphas: tuple[float, ...]
) -> None:
    funds = corner_funds(model_c)
    corners = [fund.weights for fund in funds]
    target = np.column_stack(corners) @ np.array(alphas)
    decomposition = three_fund_decompose(funds, Portfolio(target))
    assert decomposition.convex == inside_triangle(corners, target)
    assert decomposition.convex == (min(alphas) >= 0.0)


def test_target_outside_the_span() -> None:
    model = random_model(13, 4)
    funds = corner_funds(model)
    outside = next(
        Portfolio.unit(4, i) for i in range(4) if i != int(np.argmax(model.mu))
    )
    assert not three_fund_decompose(funds, outside).representable
    with pytest.raises(DimensionError):
        three_fund_decompose(funds, Portfolio.equal(3))


def test_scan_stays_convex(convex_model: RiskModel) -> None:
    scan = separation_scan(convex_model, (0.0, 0.25, 0.5, 0.75, 1.0))
    assert scan.all_convex
    assert scan.violations == ()
    for row in scan.rows:
        assert row.decomposition.alphas[2] == pytest.approx(0.0, abs=1e-9)
        assert row.weights.weights[1] == pytest.approx(row.weights.weights[2])


def test_scan_finds_hull_exit(model_c: RiskModel) -> None:
    scan = separation_scan(model_c, (0.0, 0.4, 1.0))
    assert not scan.all_convex
    assert scan.violations == (0.4,)
    np.testing.assert_allclose(scan.rows[0].decomposition.alphas, [0.0, 1.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(scan.rows[2].decomposition.alphas, [1.0, 0.0, 0.0], atol=1e-10)


def test_long_only_cost_worked_example(model_a: RiskModel) -> None:
    cost = long_only_cost(model_a, 1.0)
    assert cost.delta == pytest.approx(0.0038, abs=5e-4)
    assert cost.long_only > cost.unrestricted
    assert cost.relative == pytest.approx(cost.delta / cost.unrestricted)


def test_long_only_cost_without_short_positions() -> None:
    model = RiskModel(sigma=np.eye(3), conn=np.eye(3), mu=np.zeros(3))
    cost = long_only_cost(model, 0.5)
    assert cost.delta == pytest.approx(0.0, abs=1e-15)
