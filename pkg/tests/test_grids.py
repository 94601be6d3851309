import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmwb.errors import ValidationError
from gmwb.grids import (
    GRID_PRESETS,
    GridConfig,
    WealthGrid,
    build_guarantee_grid,
    build_wealth_grid,
    interpolate_w,
)
from gmwb.model import FeeSchedule, MarketParams, build_contract
from gmwb.pricer import StrategyKind, price


class TestWealthGrid:
    def test_default_domain_and_alignment(self, contract_5y, market_low):
        grid = build_wealth_grid(contract_5y, market_low, GridConfig())
        assert grid.nodes[0] == 0.0
        assert grid.w_max == pytest.approx(8.0, rel=1e-12)
        assert grid.nodes[grid.w0_index] == 1.0
        assert len(grid.nodes) == 401

    def test_minimal_node_count(self, contract_5y, market_low):
        grid = build_wealth_grid(contract_5y, market_low, GridConfig(num_wealth_nodes=51))
        assert len(grid.nodes) == 51
        assert grid.nodes[0] == 0.0

    def test_uniform_spacing(self, contract_5y, market_low):
        grid = build_wealth_grid(contract_5y, market_low, GridConfig())
        np.testing.assert_allclose(np.diff(grid.nodes), grid.spacing, rtol=1e-12)

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValidationError, match="num_wealth_nodes"):
            GridConfig(num_wealth_nodes=40)

    def test_presets(self):
        assert GRID_PRESETS["paper"].num_wealth_nodes == 401
        assert GRID_PRESETS["paper"].nodes_per_contract_amount == 10
        assert GRID_PRESETS["paper"].steps_per_year == 100

    @pytest.mark.slow
    def test_far_field_insensitive_to_domain_doubling(self):
        # Worst-spread configuration; doubling W_max at fixed spacing must
        # leave the reported value unchanged to 1e-6.
        contract = build_contract(T=20, events_per_year=1, beta=0.20)
        market = MarketParams(r=0.05, sigma=0.30)
        fees = FeeSchedule(alpha_m=0.01, alpha_ins=0.03)
        cfg = GridConfig(num_wealth_nodes=129, nodes_per_contract_amount=2, steps_per_year=24)
        base = build_wealth_grid(contract, market, cfg)
        doubled = WealthGrid(
            nodes=np.arange(2 * (len(base.nodes) - 1) + 1) * base.spacing,
            w0_index=base.w0_index,
        )
        v_base = price(contract, market, fees, StrategyKind.LIABILITY_MAX, cfg,
                       wealth_grid=base)
        v_doubled = price(contract, market, fees, StrategyKind.LIABILITY_MAX, cfg,
                          wealth_grid=doubled)
        assert abs(v_base.V0 - v_doubled.V0) < 1e-6
        assert abs(v_base.L0 - v_doubled.L0) < 1e-6


class TestGuaranteeGrid:
    def test_10y_levels(self):
        contract = build_contract(T=10, events_per_year=1, beta=0.10)
        grid = build_guarantee_grid(contract, GridConfig(nodes_per_contract_amount=10))
        assert grid.num_levels == 101
        assert grid.spacing == pytest.approx(0.01, abs=1e-15)

    def test_5y_single_node_per_amount(self):
        contract = build_contract(T=5, events_per_year=1, beta=0.10)
        grid = build_guarantee_grid(contract, GridConfig(nodes_per_contract_amount=1))
        np.testing.assert_allclose(grid.levels, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], atol=1e-15)

    def test_20y_with_5_nodes(self):
        contract = build_contract(T=20, events_per_year=1, beta=0.10)
        grid = build_guarantee_grid(contract, GridConfig(nodes_per_contract_amount=5))
        assert grid.num_levels == 101
        assert grid.spacing == pytest.approx(0.01, abs=1e-15)

    def test_partial_sums_are_exact_nodes(self):
        contract = build_contract(T=10, events_per_year=1, beta=0.10)
        grid = build_guarantee_grid(contract, GridConfig(nodes_per_contract_amount=10))
        g = contract.contractual_amounts[0]
        for i in range(11):
            assert grid.levels[i * 10] == pytest.approx(i * g, abs=1e-15)
        assert grid.levels[-1] == contract.A0

    def test_index_of_rejects_off_grid(self):
        contract = build_contract(T=10, events_per_year=1, beta=0.10)
        grid = build_guarantee_grid(contract, GridConfig(nodes_per_contract_amount=10))
        assert grid.index_of(0.37) == 37
        with pytest.raises(ValidationError, match="not a grid node"):
            grid.index_of(0.375)


class TestInterpolation:
    @pytest.fixture
    def grid(self, contract_5y, market_low):
        return build_wealth_grid(contract_5y, market_low, GridConfig(num_wealth_nodes=101))

    def test_exact_at_nodes(self, grid):
        row = np.sin(grid.nodes)
        for i in (0, 3, 50, 100):
            assert interpolate_w(grid, row, float(grid.nodes[i])) == row[i]

    def test_reproduces_linear(self, grid):
        row = grid.nodes.copy()
        query = 0.5 * (grid.nodes[10] + grid.nodes[11])
        assert interpolate_w(grid, row, float(query)) == pytest.approx(query, rel=1e-14)

    def test_midpoint_of_square_is_neighbor_average(self, grid):
        row = grid.nodes**2
        mid = 0.5 * (grid.nodes[7] + grid.nodes[8])
        expected = 0.5 * (grid.nodes[7] ** 2 + grid.nodes[8] ** 2)
        assert interpolate_w(grid, row, float(mid)) == pytest.approx(expected, rel=1e-14)

    def test_clamps_above_w_max(self, grid):
        row = grid.nodes.copy()
        assert interpolate_w(grid, row, grid.w_max * 2) == grid.nodes[-1]

    def test_rejects_nan(self, grid):
        with pytest.raises(ValidationError, match="NaN"):
            interpolate_w(grid, grid.nodes, float("nan"))

    def test_rejects_negative(self, grid):
        with pytest.raises(ValidationError, match="below 0"):
            interpolate_w(grid, grid.nodes, -0.5)

    @given(st.lists(st.floats(0.0, 10.0), min_size=5, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_monotone_rows_interpolate_monotonically(self, raw):
        grid = WealthGrid(nodes=np.arange(101) * 0.08, w0_index=0)
        row_vals = np.sort(np.asarray(raw))
        row = np.interp(grid.nodes, np.linspace(0, grid.w_max, len(row_vals)), row_vals)
        queries = np.linspace(0.0, grid.w_max, 173)
        out = interpolate_w(grid, row, queries)
        assert np.all(np.diff(out) >= -1e-12)

    def test_second_order_on_smooth_function(self, contract_5y, market_low):
        f = lambda w: np.exp(-((w - 2.0) ** 2))
        errs = []
        for nodes in (101, 201):
            grid = build_wealth_grid(contract_5y, market_low, GridConfig(num_wealth_nodes=nodes))
            queries = np.linspace(0.0, grid.w_max, 1009)
            errs.append(np.abs(interpolate_w(grid, f(grid.nodes), queries) - f(queries)).max())
        assert errs[0] / errs[1] >= 3.5
