import math

import numpy as np
import pytest

from certmenu.choice import segment_outcome
from certmenu.errors import DomainError
from certmenu.model import Menu, normalize_menu
from certmenu.reduction import reduce_to_pricing
from certmenu.welfare import first_best_welfare, wel_minus_rev, welfare_dp, welfare_optimal_dense
from certmenu.zoo import make_named_instance


def welfare(inst, menu):
    return segment_outcome(inst, menu).welfare


class TestDenseMenu:

    def test_linear_uniform(self, linear_uniform):
        menu, value = welfare_optimal_dense(linear_uniform, 100)
        assert len(menu) == 101
        np.testing.assert_allclose(menu.prices, 0.0)
        assert value == pytest.approx(0.5, abs=1e-6)

    def test_equal_revenue_welfare_grows_with_log_H(self):
        H = math.e ** 4
        inst = make_named_instance("linear_equal_revenue", {"H": H}).pricing()
        _, value = welfare_optimal_dense(inst, 50)
        assert value == pytest.approx(1.0 + math.log(H), abs=1e-5)

    def test_cost_above_every_value_kills_trade(self):
        inst = make_named_instance("linear_uniform", {"c": 2.0}).pricing()
        menu, value = welfare_optimal_dense(inst, 20)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert segment_outcome(inst, menu).items_sold == [0]
        assert first_best_welfare(inst) == pytest.approx(0.0, abs=1e-12)

    def test_non_decreasing_in_grid_size(self, gap_e2):
        values = [welfare_optimal_dense(gap_e2, n)[1] for n in (10, 20, 40)]
        assert values[1] >= values[0] - 1e-9
        assert values[2] >= values[1] - 1e-9
        assert values[2] <= first_best_welfare(gap_e2) + 1e-6

    def test_needs_two_levels(self, linear_uniform):
        with pytest.raises(DomainError):
            welfare_optimal_dense(linear_uniform, 1)


class TestFirstBest:

    def test_linear_uniform(self, linear_uniform):
        assert first_best_welfare(linear_uniform) == pytest.approx(0.5, abs=1e-6)

    def test_gap_peaks_at_own_type(self, gap_e2):
        # every type trades at q = theta, so first-best welfare is E[theta] = 1 + ln H
        assert first_best_welfare(gap_e2) == pytest.approx(3.0, abs=1e-5)

    def test_posted_price_leaves_welfare_on_the_table(self):
        H = math.e ** 4
        inst = make_named_instance("linear_equal_revenue", {"H": H}).pricing()
        posted = normalize_menu([(1.0, H)])
        assert welfare(inst, posted) == pytest.approx(1.0, abs=1e-6)
        assert first_best_welfare(inst) == pytest.approx(5.0, abs=1e-5)


class TestWelfareDp:

    def test_linear_uniform_top_quality(self, linear_uniform):
        menu, tables = welfare_dp(linear_uniform, 0.01, 1)
        assert menu.to_list() == [[0.0, 0.0], [1.0, 0.0]]
        assert welfare(linear_uniform, menu) == pytest.approx(0.5, abs=1e-6)
        assert tables.objective == "welfare"

    def test_prices_at_cost(self):
        inst = make_named_instance("linear_uniform", {"c": 0.1}).pricing()
        menu, _ = welfare_dp(inst, 0.05, 3)
        np.testing.assert_allclose(menu.prices[1:], 0.1)
        assert segment_outcome(inst, menu).revenue == pytest.approx(0.0, abs=1e-12)

    def test_more_levels_help_on_gap(self, gap_e2):
        one, _ = welfare_dp(gap_e2, 0.05, 1)
        eight, _ = welfare_dp(gap_e2, 0.05, 8)
        assert len(eight) - 1 <= 8
        assert welfare(gap_e2, eight) > welfare(gap_e2, one) + 0.1
        assert welfare(gap_e2, eight) <= first_best_welfare(gap_e2) + 1e-6

    def test_qualities_are_multiples_of_eps(self, gap_e2):
        menu, _ = welfare_dp(gap_e2, 0.05, 4)
        levels = menu.qualities[1:] / 0.05
        np.testing.assert_allclose(levels, np.round(levels), atol=1e-9)

    def test_bad_arguments(self, linear_uniform):
        with pytest.raises(DomainError):
            welfare_dp(linear_uniform, 0.0, 1)
        with pytest.raises(DomainError):
            welfare_dp(linear_uniform, 0.1, 0)


class TestWelMinusRev:

    def test_trivial_menu(self, gap_e2):
        assert wel_minus_rev(gap_e2, Menu.trivial()) == 0.0

    def test_single_item(self, linear_uniform):
        assert wel_minus_rev(linear_uniform, normalize_menu([(1.0, 0.5)])) == pytest.approx(0.125, abs=1e-8)

    def test_nested_menus_on_gap(self, gap_e2):
        small = normalize_menu([(2.0, 0.8)], gap_e2.q_max)
        large = normalize_menu([(2.0, 0.8), (5.0, 2.0), (9.0, 4.0)], gap_e2.q_max)
        assert wel_minus_rev(gap_e2, large) >= wel_minus_rev(gap_e2, small)


SUPERSET_INSTANCES = ["linear_uniform", "screening", "linear_equal_revenue"]


def superset_instance(name):
    if name == "screening":
        return reduce_to_pricing(make_named_instance("quadratic_screening").economy())
    if name == "linear_equal_revenue":
        return make_named_instance(name, {"H": 10.0}).pricing()
    return make_named_instance(name).pricing()


class TestSupersetMonotonicity:

    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("name", SUPERSET_INSTANCES)
    def test_adding_items_never_lowers_buyer_surplus(self, name, seed):
        inst = superset_instance(name)
        rng = np.random.default_rng(seed)
        for _ in range(17):
            size = int(rng.integers(2, 8))
            qualities = rng.uniform(0.05, inst.q_max, size)
            thetas = inst.dist.quantile(rng.uniform(0.0, 1.0, size))
            prices = np.maximum(inst.v(qualities, thetas), 0.0) * rng.uniform(0.3, 1.0, size)
            items = list(zip(qualities, prices))
            cut = int(rng.integers(1, size))
            smaller = normalize_menu(items[:cut], inst.q_max)
            larger = normalize_menu(items, inst.q_max)
            assert wel_minus_rev(inst, larger) >= wel_minus_rev(inst, smaller) - 1e-9
