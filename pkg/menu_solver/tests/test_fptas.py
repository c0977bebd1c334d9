import math

import numpy as np
import pytest

from certmenu.choice import revenue, segment_outcome, sold_menu
from certmenu.errors import DomainError, PreconditionError
from certmenu.fptas import (build_grids, discretize_menu, dp_solve, linear_single_item, monotone_prune,
                            sparsify)
from certmenu.model import normalize_menu
from certmenu.zoo import make_named_instance, rich_gap_menu


def random_monotone_menu(rng, size, q_max=1.0):
    qualities = np.sort(rng.uniform(0.02, q_max, size))
    prices = np.sort(rng.uniform(0.0, 0.8, size)) * q_max
    return normalize_menu(zip(qualities, prices), q_max)


class TestGrids:

    def test_quality_grid_is_geometric(self, linear_uniform):
        grids = build_grids(linear_uniform, 0.1, 2)
        assert grids.quantity_grid[0] == 0.0
        assert grids.quantity_grid[1] == pytest.approx(0.1)
        np.testing.assert_allclose(grids.quantity_grid[2:] / grids.quantity_grid[1:-1], 1.1)
        assert grids.quantity_grid[-1] <= 1.0

    def test_price_grid(self, linear_uniform):
        grids = build_grids(linear_uniform, 0.1, 2)
        assert grids.price_step == pytest.approx(0.1)
        assert grids.price_grid[0] == 0.0
        np.testing.assert_allclose(np.diff(grids.price_grid), 0.1)
        assert grids.price_grid[-1] >= 1.0

    def test_unlimited_items_square_the_step(self, linear_uniform):
        grids = build_grids(linear_uniform, 0.1)
        assert grids.k == 10
        assert grids.price_step == pytest.approx(0.01)

    def test_negative_prices(self, linear_uniform):
        grids = build_grids(linear_uniform, 0.1, 2, negative_prices=True)
        assert grids.price_grid[0] == pytest.approx(-0.6)
        assert 0.0 in grids.price_grid

    def test_value_scale(self, linear_equal_revenue):
        grids = build_grids(linear_equal_revenue, 0.1, 1)
        assert grids.value_scale == pytest.approx(10.0 * grids.quantity_grid[-1])
        assert grids.price_step == pytest.approx(0.1 * grids.value_scale)

    def test_bad_eps(self, linear_uniform):
        with pytest.raises(DomainError):
            build_grids(linear_uniform, 1.5)


class TestMonotonePrune:

    def test_drops_unsold_item(self, linear_uniform):
        menu = normalize_menu([(0.5, 0.6), (1.0, 0.4)])
        assert monotone_prune(linear_uniform, menu).to_list() == [[0.0, 0.0], [1.0, 0.4]]

    def test_monotone_menu_is_unchanged(self, linear_uniform):
        menu = normalize_menu([(0.5, 0.1), (1.0, 0.5)])
        assert monotone_prune(linear_uniform, menu) == menu

    def test_drops_items_above_an_expensive_item(self, gap_e2):
        menu = normalize_menu([(1.0, 0.5), (2.0, 1.5), (4.0, 1.0)])
        assert segment_outcome(gap_e2, menu).items_sold == [1, 2, 3]
        pruned = monotone_prune(gap_e2, menu)
        assert pruned.to_list() == [[0.0, 0.0], [1.0, 0.5], [2.0, 1.5]]
        assert revenue(gap_e2, pruned) == pytest.approx(1.0, abs=1e-8)

    def test_drops_cheap_interior_block(self, gap_e2):
        menu = normalize_menu([(1.0, 0.5), (2.0, 1.5), (3.0, 1.0), (5.0, 2.0)])
        assert segment_outcome(gap_e2, menu).items_sold == [1, 2, 3, 4]
        pruned = monotone_prune(gap_e2, menu)
        assert pruned.to_list() == [[0.0, 0.0], [1.0, 0.5], [2.0, 1.5], [5.0, 2.0]]
        assert revenue(gap_e2, pruned) >= revenue(gap_e2, menu)

    @pytest.mark.parametrize("seed", range(4))
    def test_never_loses_revenue(self, gap_e2, seed):
        rng = np.random.default_rng(seed)
        for _ in range(50):
            size = int(rng.integers(2, 7))
            qualities = rng.uniform(0.5, gap_e2.q_max, size)
            menu = normalize_menu(zip(qualities, qualities * rng.uniform(0.05, 0.9, size)), gap_e2.q_max)
            pruned = monotone_prune(gap_e2, menu)
            assert pruned.is_monotone()
            assert revenue(gap_e2, pruned) >= revenue(gap_e2, menu) - 1e-9
            assert monotone_prune(gap_e2, pruned) == pruned


class TestSparsify:

    @pytest.mark.slow
    def test_large_menu(self, linear_uniform):
        qualities = np.arange(1, 1001) / 1000.0
        menu = normalize_menu(zip(qualities, qualities ** 2 / 2), 1.0)
        out = sparsify(linear_uniform, menu, 0.1)
        assert len(out) <= 11
        assert revenue(linear_uniform, out) >= revenue(linear_uniform, menu) - 0.1 - 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_item_bound_and_loss(self, linear_uniform, seed):
        rng = np.random.default_rng(seed)
        menu = sold_menu(linear_uniform, random_monotone_menu(rng, 30))
        for eps in (0.5, 0.2, 0.1):
            out = sparsify(linear_uniform, menu, eps)
            assert len(out) <= math.ceil(1 / eps) + 1
            assert set(out.items) <= set(menu.items)
            assert revenue(linear_uniform, out) >= revenue(linear_uniform, menu) - eps - 1e-6

    def test_cheap_menu_collapses(self, linear_uniform):
        menu = normalize_menu([(0.2, 0.01), (0.5, 0.04), (0.9, 0.09)])
        assert sparsify(linear_uniform, menu, 0.1).to_list() == [[0.0, 0.0], [0.2, 0.01]]

    def test_needs_monotone_menu(self, linear_uniform):
        with pytest.raises(PreconditionError):
            sparsify(linear_uniform, normalize_menu([(0.5, 0.4), (1.0, 0.2)]), 0.1)


class TestDiscretizeMenu:

    def test_single_item(self, linear_uniform):
        (q, p), = discretize_menu(linear_uniform, normalize_menu([(1.0, 0.5)]), 0.1).items[1:]
        assert q == pytest.approx(0.1 * 1.1 ** 24)
        assert q == pytest.approx(0.98497, abs=1e-5)
        assert p == pytest.approx(0.1)

    def test_grid_item_only_gets_the_discount(self, linear_uniform):
        q = 0.1 * 1.1 ** 3
        out = discretize_menu(linear_uniform, normalize_menu([(q, 0.5)]), 0.1)
        assert out.to_list()[1] == pytest.approx([q, 0.2])

    def test_small_qualities_are_dropped(self, linear_uniform):
        out = discretize_menu(linear_uniform, normalize_menu([(0.05, 0.01), (1.0, 0.5)]), 0.1)
        assert len(out) == 2
        assert out[1][1] == pytest.approx(0.1)

    def test_trivial_menu(self, linear_uniform):
        assert discretize_menu(linear_uniform, normalize_menu([]), 0.1) == normalize_menu([])

    @pytest.mark.parametrize("seed", range(5))
    def test_loss_bound(self, linear_uniform, seed):
        rng = np.random.default_rng(seed)
        eps = 0.05
        menu = sold_menu(linear_uniform, random_monotone_menu(rng, 3))
        k = len(menu) - 1
        out = discretize_menu(linear_uniform, menu, eps)
        assert revenue(linear_uniform, out) >= revenue(linear_uniform, menu) - 4 * (k + linear_uniform.lam) * eps

    def test_needs_monotone_menu(self, linear_uniform):
        with pytest.raises(PreconditionError):
            discretize_menu(linear_uniform, normalize_menu([(0.5, 0.4), (1.0, 0.2)]), 0.1)


class TestLinearSingleItem:

    def test_uniform(self, linear_uniform):
        menu = linear_single_item(linear_uniform)
        assert menu[1][0] == 1.0
        assert menu[1][1] == pytest.approx(0.5, abs=1e-4)
        assert revenue(linear_uniform, menu) == pytest.approx(0.25, abs=1e-8)

    def test_equal_revenue_prefers_highest_price(self, linear_equal_revenue):
        menu = linear_single_item(linear_equal_revenue)
        assert menu[1][1] == pytest.approx(10.0)
        assert revenue(linear_equal_revenue, menu) == pytest.approx(1.0, abs=1e-8)

    def test_rejects_non_linear_values(self, gap_e2):
        with pytest.raises(PreconditionError):
            linear_single_item(gap_e2)


class TestDpSolve:

    def test_linear_uniform_single_item(self, linear_uniform):
        menu, tables, diagnostics = dp_solve(linear_uniform, 0.01, 1)
        assert len(menu) == 2
        assert diagnostics["revenue_exact"] == pytest.approx(0.25, abs=0.02)
        assert menu[1][1] == pytest.approx(0.5, abs=0.05)

    def test_linear_equal_revenue_single_item(self, linear_equal_revenue):
        menu, _, diagnostics = dp_solve(linear_equal_revenue, 0.05, 1)
        assert diagnostics["revenue_exact"] == pytest.approx(1.0, abs=0.06)

    def test_tables(self, linear_uniform):
        menu, tables, diagnostics = dp_solve(linear_uniform, 0.2, 3, n_types=50, timing=False)
        assert "wall_ms" not in diagnostics
        assert menu.is_monotone()
        assert np.all(tables.M[1:] >= tables.M[:-1])
        # one-item cells: price times the mass of atoms that buy
        q, p = tables.items[:, 0], tables.items[:, 1]
        buys = tables.thetas[None, :] * q[:, None] - p[:, None] >= 0
        np.testing.assert_allclose(tables.M[0], p * (buys * tables.masses).sum(axis=1), rtol=1e-12, atol=1e-15)
        finite = ~np.isnan(tables.L)
        assert np.all((tables.L[finite] >= 0.0) & (tables.L[finite] <= 1.0))
        assert diagnostics["revenue_dp"] == pytest.approx(float(tables.M.max()))

    def test_exact_revenue_is_reported(self, gap_e2):
        menu, _, diagnostics = dp_solve(gap_e2, 0.2, 2, n_types=50)
        assert diagnostics["revenue_exact"] == pytest.approx(revenue(gap_e2, menu))
        assert diagnostics["wall_ms"] >= 0
        assert len(menu) - 1 <= 2

    def test_single_item_on_gap_is_bounded(self, gap_e2):
        menu, _, diagnostics = dp_solve(gap_e2, 0.05, 1, n_types=200)
        assert diagnostics["revenue_exact"] <= 2.0 + 0.05

    def test_negative_price_range_sells_at_non_negative_prices(self, linear_uniform):
        menu, tables, _ = dp_solve(linear_uniform, 0.2, 2, n_types=50, negative_prices=True, timing=False)
        assert min(tables.grids.price_grid) < 0
        assert menu.prices.min() >= 0


class TestGuarantees:

    @pytest.mark.slow
    @pytest.mark.parametrize("H, expected", [(math.e ** 2, 1.5), (math.e ** 4, 2.5), (math.e ** 6, 3.5)])
    def test_rich_menu_beats_single_items(self, H, expected):
        inst = make_named_instance("piecewise_gap", {"H": H}).pricing()
        rich = revenue(inst, rich_gap_menu(H))
        assert rich == pytest.approx(expected, abs=0.05)
        single, _, _ = dp_solve(inst, 0.05, 1, n_types=200, timing=False)
        assert revenue(inst, single) <= 2.0 + 0.05

    @pytest.mark.slow
    def test_many_items_recover_the_rich_menu(self, gap_e2):
        rich = revenue(gap_e2, rich_gap_menu(math.e ** 2))
        menu, _, diagnostics = dp_solve(gap_e2, 0.05, 40, n_types=200, timing=False)
        assert diagnostics["revenue_exact"] >= 0.85 * rich

    @pytest.mark.slow
    @pytest.mark.parametrize("name, params", [("linear_uniform", {}), ("linear_equal_revenue", {"H": 10.0}),
                                              ("piecewise_gap", {"H": math.e ** 2}),
                                              ("custom", {"kind": "pricing", "valuation": "quadratic"}),
                                              ("quadratic_screening", {})])
    def test_revenue_trend_as_eps_halves(self, name, params):
        inst = make_named_instance(name, params).pricing()
        k = 2
        revenues = {}
        scale = None
        for eps in (0.2, 0.1, 0.05, 0.025):
            _, tables, diagnostics = dp_solve(inst, eps, k, n_types=200, timing=False)
            revenues[eps] = diagnostics["revenue_exact"]
            scale = tables.grids.value_scale
        for coarse, fine in ((0.2, 0.1), (0.1, 0.05)):
            assert revenues[fine] >= revenues[coarse] - inst.lam * coarse * scale
        # deficit against the finest run, in units of lam * eps
        fitted = max((revenues[0.025] - revenues[eps]) / (inst.lam * eps) for eps in (0.2, 0.1, 0.05))
        assert fitted <= 4.0

    @pytest.mark.slow
    def test_work_scales_with_eps(self, linear_uniform):
        eps_values = np.array([0.2, 0.1, 0.05])
        work = []
        for eps in eps_values:
            _, _, diagnostics = dp_solve(linear_uniform, float(eps), 3, timing=False)
            work.append(diagnostics["transitions"])
        slope = np.polyfit(np.log(1 / eps_values), np.log(work), 1)[0]
        assert 3.0 <= slope <= 4.5
