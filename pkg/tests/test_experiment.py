import json

import pytest

from gmwb.errors import ConfigurationError
from gmwb.experiment import (
    ExperimentConfig,
    Scenario,
    _format_cell,
    config_from_json,
    emit_figure_data,
    figure_scenarios,
    paper_alpha_m_sweep,
    paper_scenarios,
    run_sweep,
    run_tables,
    run_validation,
)
from gmwb.grids import GridConfig
from gmwb.pricer import StrategyKind


def tiny_config(**overrides):
    base = dict(
        scenarios=(Scenario(r=0.03, sigma=0.20, beta=0.10, T=2.0),),
        alpha_m_values=(0.0, 0.01),
        grid=GridConfig(num_wealth_nodes=101, nodes_per_contract_amount=2,
                        steps_per_year=12),
        figure_market_conditions=((0.03, 0.20),),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestDefaults:
    def test_paper_matrix_shape(self):
        assert len(paper_scenarios()) == 24
        assert len(paper_alpha_m_sweep()) == 11
        assert paper_alpha_m_sweep()[0] == 0.0
        assert paper_alpha_m_sweep()[-1] == pytest.approx(0.02)

    def test_scenario_order_matches_tables(self):
        rows = paper_scenarios()
        assert rows[0] == Scenario(r=0.01, sigma=0.10, beta=0.10, T=5.0)
        assert rows[3] == Scenario(r=0.01, sigma=0.10, beta=0.20, T=5.0)
        assert rows[6] == Scenario(r=0.01, sigma=0.30, beta=0.10, T=5.0)
        assert rows[12] == Scenario(r=0.05, sigma=0.10, beta=0.10, T=5.0)
        assert rows[-1] == Scenario(r=0.05, sigma=0.30, beta=0.20, T=20.0)

    def test_config_validation(self):
        with pytest.raises(ConfigurationError, match="alpha_m"):
            ExperimentConfig(alpha_m_values=(0.06,))
        with pytest.raises(ConfigurationError, match="scenario"):
            ExperimentConfig(scenarios=())
        with pytest.raises(ConfigurationError, match="workers"):
            ExperimentConfig(workers=0)


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        payload = {
            "scenarios": [{"r": 0.05, "sigma": 0.30, "beta": 0.20, "T": 10}],
            "alpha_m_values": [0.0, 0.002],
            "strategies": ["liability_max"],
            "grid": {"num_wealth_nodes": 201, "nodes_per_contract_amount": 5,
                     "steps_per_year": 50},
            "workers": 2,
            "seed": 7,
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        config = config_from_json(path)
        assert config.scenarios == (Scenario(r=0.05, sigma=0.30, beta=0.20, T=10.0),)
        assert config.strategies == (StrategyKind.LIABILITY_MAX,)
        assert config.grid.num_wealth_nodes == 201
        assert config.workers == 2

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"volatility": 0.2}))
        with pytest.raises(ConfigurationError, match="unknown config keys"):
            config_from_json(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            config_from_json(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError, match="valid JSON"):
            config_from_json(path)


class TestSweep:
    def test_cells_and_warm_start(self):
        config = tiny_config()
        cells = run_sweep(config)
        assert set(cells) == {
            (config.scenarios[0], StrategyKind.LIABILITY_MAX),
            (config.scenarios[0], StrategyKind.VALUE_MAX),
        }
        for lane in cells.values():
            assert len(lane) == 2
            for cell in lane:
                assert cell.fee is not None
                assert abs(cell.L0) < 1e-4
                assert cell.error is None

    def test_worker_pool_matches_serial(self):
        config = tiny_config()
        serial = run_sweep(config)
        pooled = run_sweep(tiny_config(workers=2))
        for key, lane in serial.items():
            for a, b in zip(lane, pooled[key]):
                assert a.fee == b.fee


class TestTables:
    def test_files_shape_and_determinism(self, tmp_path):
        config = tiny_config()
        out1 = tmp_path / "one"
        out2 = tmp_path / "two"
        files1 = run_tables(config, out1)
        files2 = run_tables(config, out2)
        names = sorted(p.name for p in files1)
        assert names == [
            "fair_fees_liability.csv",
            "fair_fees_value.csv",
            "policy_values_liability.csv",
            "policy_values_value.csv",
        ]
        for p1 in files1:
            p2 = out2 / p1.name
            assert p1.read_bytes() == p2.read_bytes()
        header, row = (out1 / "fair_fees_liability.csv").read_text().splitlines()
        assert header == "r_pct,sigma_pct,beta_pct,T,am_pct_0,am_pct_1"
        fields = row.split(",")
        assert fields[:4] == ["3", "20", "10", "2"]
        assert float(fields[4]) > 0
        assert (out1 / "run_metadata.json").exists()

    def test_nan_formatting(self):
        assert _format_cell(None) == "NaN"
        assert _format_cell(3.079999) == "3.0800"

    def test_policy_values_near_one_at_zero_mgmt_fee(self, tmp_path):
        config = tiny_config()
        run_tables(config, tmp_path)
        rows = (tmp_path / "policy_values_liability.csv").read_text().splitlines()
        first_value = float(rows[1].split(",")[4])
        assert first_value == pytest.approx(1.0, abs=5e-3)


class TestFigureData:
    def test_series_files_and_dominance(self, tmp_path):
        config = tiny_config()
        paths = emit_figure_data(config, tmp_path)
        assert [p.name for p in paths] == ["figure_r3_sigma20_beta10_T2.csv"]
        lines = paths[0].read_text().splitlines()
        assert lines[0] == "alpha_m,fee_liability_pct,fee_value_pct,V0_liability,V0_value"
        assert len(lines) == 3
        for line in lines[1:]:
            am, fee_l, fee_v, v_l, v_v = map(float, line.split(","))
            assert fee_l >= fee_v - 1e-4
            assert v_v >= v_l - 1e-6

    def test_panel_expansion(self):
        config = tiny_config(
            scenarios=(
                Scenario(r=0.03, sigma=0.20, beta=0.10, T=2.0),
                Scenario(r=0.03, sigma=0.20, beta=0.20, T=2.0),
                Scenario(r=0.03, sigma=0.20, beta=0.10, T=3.0),
            ),
            figure_market_conditions=((0.03, 0.20), (0.05, 0.10)),
        )
        panels = figure_scenarios(config)
        assert len(panels) == 8  # 2 conditions x 2 betas x 2 maturities

    def test_default_layout_is_six_panels_per_condition(self):
        panels = figure_scenarios(ExperimentConfig())
        assert len(panels) == 12
        low_growth = [p for p in panels if (p.r, p.sigma) == (0.01, 0.30)]
        assert len(low_growth) == 6  # 2 penalty rates x 3 maturities

    def test_empty_sweep_emits_header_only(self, tmp_path):
        config = tiny_config(alpha_m_values=())
        paths = emit_figure_data(config, tmp_path)
        lines = paths[0].read_text().splitlines()
        assert lines == ["alpha_m,fee_liability_pct,fee_value_pct,V0_liability,V0_value"]


class TestMutationSanity:
    def test_flipped_liability_source_sign_breaks_identity(self, fast_grid):
        # The liability PDE's fee-income source enters with a definite sign; a
        # flipped sign inverts the pure fee-income solution and moves the
        # management-fee identity by twice the fee value, far beyond the 1e-4
        # gate the validation suite applies.
        import numpy as np

        from gmwb.model import FeeSchedule, MarketParams, build_contract
        from gmwb.grids import build_wealth_grid
        from gmwb.pde import advance_interval

        contract = build_contract(T=1, events_per_year=1, beta=0.0)
        market = MarketParams(r=0.05, sigma=0.20)
        fees = FeeSchedule(alpha_m=0.0, alpha_ins=0.02)
        wgrid = build_wealth_grid(contract, market, fast_grid)
        zero = np.zeros((len(wgrid.nodes), 1))
        good = advance_interval([zero.copy()], [fees.alpha_ins * wgrid.nodes],
                                wgrid, market, fees, 0.0, 1.0,
                                fast_grid.steps_per_year)[0]
        flipped = advance_interval([zero.copy()], [-fees.alpha_ins * wgrid.nodes],
                                   wgrid, market, fees, 0.0, 1.0,
                                   fast_grid.steps_per_year)[0]
        np.testing.assert_allclose(flipped, -good, rtol=0, atol=1e-12)
        i = wgrid.w0_index
        assert abs(flipped[i, 0] - good[i, 0]) > 1e-4


@pytest.mark.slow
class TestValidation:
    def test_all_checks_pass_on_fast_grid(self, fast_grid):
        config = ExperimentConfig(grid=fast_grid, mc_validation=True, mc_paths=100_000)
        checks = run_validation(config)
        names = {c.name for c in checks}
        assert {"identity_construction", "identity_fee_surface", "dominance_liability",
                "zero_mgmt_fee_coincidence", "analytic_call_oracle", "spatial_order_two",
                "mc_value_agreement"} <= names
        failures = [c.line() for c in checks if not c.passed]
        assert not failures, failures
