"""Batch experiment harness: scenario sweeps, CSV tables, figure data, checks.

The harness runs the full scenario matrix (rates x volatilities x penalties x
maturities, swept over management-fee levels under both withdrawal strategies)
and writes one fair-fee table and one policy-value table per strategy, plus
per-panel series files for the figure layouts. Work is organized in lanes, one
per (scenario, strategy): cells within a lane sweep the management fee in
ascending order so each calibration can seed its bracket from the previous
cell's fee, and lanes are distributed over a process pool and gathered by
index, making output deterministic regardless of completion order.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import bs_call
from .calibrate import CalibrationSettings, calibrate
from .errors import ConfigurationError, NoRootError, ValidationError
from .grids import GRID_PRESETS, GridConfig, build_wealth_grid
from .mc import simulate
from .model import FeeSchedule, MarketParams, build_contract
from .pde import advance_interval
from .pricer import StrategyKind, extract_policy, price

log = logging.getLogger(__name__)

FEE_TABLE_FILES = {
    StrategyKind.LIABILITY_MAX: "fair_fees_liability.csv",
    StrategyKind.VALUE_MAX: "fair_fees_value.csv",
}
VALUE_TABLE_FILES = {
    StrategyKind.LIABILITY_MAX: "policy_values_liability.csv",
    StrategyKind.VALUE_MAX: "policy_values_value.csv",
}


@dataclass(frozen=True)
class Scenario:
    """One market/contract row of the experiment matrix."""

    r: float
    sigma: float
    beta: float
    T: float

    def label(self) -> str:
        return (
            f"r{self.r * 100:g}_sigma{self.sigma * 100:g}_"
            f"beta{self.beta * 100:g}_T{self.T:g}"
        )


def paper_scenarios() -> list[Scenario]:
    """The 24 scenario rows in table order: r, then sigma, then beta, then T."""
    return [
        Scenario(r=r, sigma=s, beta=b, T=t)
        for r, s, b, t in itertools.product(
            (0.01, 0.05), (0.10, 0.30), (0.10, 0.20), (5.0, 10.0, 20.0)
        )
    ]


def paper_alpha_m_sweep() -> list[float]:
    """Management fee levels 0% to 2% in 0.2% steps."""
    return [round(0.002 * k, 10) for k in range(11)]


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a batch run; defaults reproduce the experiment setup."""

    scenarios: tuple[Scenario, ...] = tuple(paper_scenarios())
    alpha_m_values: tuple[float, ...] = tuple(paper_alpha_m_sweep())
    strategies: tuple[StrategyKind, ...] = (
        StrategyKind.LIABILITY_MAX,
        StrategyKind.VALUE_MAX,
    )
    grid: GridConfig = field(default_factory=GridConfig)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    figure_market_conditions: tuple[tuple[float, float], ...] = ((0.01, 0.30), (0.05, 0.10))
    mc_validation: bool = False
    mc_paths: int = 200_000
    events_per_year: int = 1
    W0: float = 1.0
    A0: float = 1.0
    workers: int = 1
    seed: int = 20170817

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ConfigurationError("scenario list must be nonempty")
        # An empty alpha_m sweep is legal and yields header-only outputs.
        for am in self.alpha_m_values:
            if not 0.0 <= am <= 0.05:
                raise ConfigurationError(f"alpha_m {am} outside [0, 0.05]")
        if not self.strategies:
            raise ConfigurationError("need at least one strategy")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


def config_from_json(path: str | Path) -> ExperimentConfig:
    """Load a configuration file; unspecified fields keep their defaults.

    All rates in the file are per-annum decimals. Recognized keys: scenarios
    (list of {r, sigma, beta, T}), alpha_m_values, strategies, grid
    ({num_wealth_nodes, nodes_per_contract_amount, steps_per_year}),
    calibration ({bracket_low, bracket_high, tolerance, max_iterations}),
    figure_market_conditions (list of [r, sigma]), mc_validation, mc_paths,
    events_per_year, W0, A0, workers, seed.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc

    kwargs: dict = {}
    if "scenarios" in raw:
        kwargs["scenarios"] = tuple(
            Scenario(r=s["r"], sigma=s["sigma"], beta=s["beta"], T=float(s["T"]))
            for s in raw["scenarios"]
        )
    if "alpha_m_values" in raw:
        kwargs["alpha_m_values"] = tuple(float(a) for a in raw["alpha_m_values"])
    if "strategies" in raw:
        kwargs["strategies"] = tuple(StrategyKind.from_name(s) for s in raw["strategies"])
    if "grid" in raw:
        kwargs["grid"] = GridConfig(**raw["grid"])
    if "calibration" in raw:
        kwargs["calibration"] = CalibrationSettings(**raw["calibration"])
    if "figure_market_conditions" in raw:
        kwargs["figure_market_conditions"] = tuple(
            (float(r), float(s)) for r, s in raw["figure_market_conditions"]
        )
    for key in ("mc_validation", "mc_paths", "events_per_year", "W0", "A0", "workers", "seed"):
        if key in raw:
            kwargs[key] = raw[key]
    unknown = set(raw) - {
        "scenarios", "alpha_m_values", "strategies", "grid", "calibration",
        "figure_market_conditions", "mc_validation", "mc_paths",
        "events_per_year", "W0", "A0", "workers", "seed",
    }
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**kwargs)
    except (ValidationError, TypeError) as exc:
        raise ConfigurationError(str(exc)) from exc


@dataclass
class CellResult:
    """Outcome of one (scenario, strategy, alpha_m) calibration."""

    fee: float | None
    V0: float | None
    L0: float | None
    M0: float | None
    error: str | None = None


@dataclass(frozen=True)
class LanePayload:
    scenario: Scenario
    strategy: StrategyKind
    alpha_m_values: tuple[float, ...]
    grid: GridConfig
    calibration: CalibrationSettings
    events_per_year: int
    W0: float
    A0: float


def _run_lane(payload: LanePayload) -> list[CellResult]:
    """Calibrate every alpha_m cell of one (scenario, strategy) lane.

    Fees vary smoothly along the sweep, so each cell seeds its bracket from
    the previous cell's root; failures fall back to the full bracket inside
    ``calibrate`` and an unbracketable cell is recorded as NaN without
    aborting the lane.
    """
    sc = payload.scenario
    contract = build_contract(
        T=sc.T,
        events_per_year=payload.events_per_year,
        beta=sc.beta,
        W0=payload.W0,
        A0=payload.A0,
    )
    market = MarketParams(r=sc.r, sigma=sc.sigma)
    results: list[CellResult] = []
    hint: float | None = None
    for alpha_m in payload.alpha_m_values:
        try:
            fee, res = calibrate(
                contract,
                market,
                alpha_m,
                payload.strategy,
                payload.calibration,
                payload.grid,
                hint=hint,
                hint_margin=0.015,
            )
            results.append(CellResult(fee=fee, V0=res.V0, L0=res.L0, M0=res.M0))
            hint = fee
        except NoRootError as exc:
            log.warning(
                "no fair fee for %s %s alpha_m=%.4f: %s",
                sc.label(), payload.strategy.value, alpha_m, exc,
            )
            results.append(CellResult(fee=None, V0=None, L0=None, M0=None, error=str(exc)))
            hint = None
    return results


def run_sweep(
    config: ExperimentConfig,
    scenarios: list[Scenario] | None = None,
) -> dict[tuple[Scenario, StrategyKind], list[CellResult]]:
    """Run all (scenario, strategy) lanes, in parallel when configured."""
    chosen = list(scenarios) if scenarios is not None else list(config.scenarios)
    payloads = [
        LanePayload(
            scenario=sc,
            strategy=strat,
            alpha_m_values=config.alpha_m_values,
            grid=config.grid,
            calibration=config.calibration,
            events_per_year=config.events_per_year,
            W0=config.W0,
            A0=config.A0,
        )
        for sc in chosen
        for strat in config.strategies
    ]
    if config.workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            lane_results = list(pool.map(_run_lane, payloads))
    else:
        lane_results = [_run_lane(p) for p in payloads]
    return {
        (p.scenario, p.strategy): res for p, res in zip(payloads, lane_results)
    }


def _format_cell(value: float | None, decimals: int = 4) -> str:
    return "NaN" if value is None else f"{value:.{decimals}f}"


def _table_header(alpha_m_values: tuple[float, ...]) -> list[str]:
    return ["r_pct", "sigma_pct", "beta_pct", "T"] + [
        f"am_pct_{am * 100:.4g}" for am in alpha_m_values
    ]


def _write_table(
    path: Path,
    config: ExperimentConfig,
    cells: dict,
    strategy: StrategyKind,
    extract,
) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_table_header(config.alpha_m_values))
        for sc in config.scenarios:
            row = [
                f"{sc.r * 100:g}",
                f"{sc.sigma * 100:g}",
                f"{sc.beta * 100:g}",
                f"{sc.T:g}",
            ]
            lane = cells[(sc, strategy)]
            row.extend(_format_cell(extract(cell)) for cell in lane)
            writer.writerow(row)


def _ensure_out_dir(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"output directory {out} is not writable: {exc}") from exc
    return out


def run_tables(config: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    """Run the full sweep and write the four tables plus a metadata sidecar.

    Fees are written in percent, policy values in units of the initial
    wealth, both to four decimals; reruns with an identical configuration
    produce byte-identical CSV bodies.
    """
    out = _ensure_out_dir(out_dir)
    t0 = time.perf_counter()
    cells = run_sweep(config)
    written: list[Path] = []
    for strat in config.strategies:
        fee_path = out / FEE_TABLE_FILES[strat]
        _write_table(
            fee_path, config, cells, strat,
            lambda c: None if c.fee is None else c.fee * 100.0,
        )
        written.append(fee_path)
        value_path = out / VALUE_TABLE_FILES[strat]
        _write_table(value_path, config, cells, strat, lambda c: c.V0)
        written.append(value_path)
    _write_metadata(
        out / "run_metadata.json",
        config,
        wall_time_s=time.perf_counter() - t0,
        files=[p.name for p in written],
    )
    return written


def figure_scenarios(config: ExperimentConfig) -> list[Scenario]:
    """Scenario panels for the figure layouts: per configured (r, sigma)
    market condition, every (beta, T) present in the scenario list."""
    betas = sorted({sc.beta for sc in config.scenarios})
    maturities = sorted({sc.T for sc in config.scenarios})
    return [
        Scenario(r=r, sigma=s, beta=b, T=t)
        for (r, s) in config.figure_market_conditions
        for b in betas
        for t in maturities
    ]


def emit_figure_data(config: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    """Write one series file per figure panel.

    Columns: alpha_m (decimal), fair fees in percent under both strategies,
    and the policy values at those fees.
    """
    out = _ensure_out_dir(out_dir)
    panels = figure_scenarios(config)
    needed_strategies = (StrategyKind.LIABILITY_MAX, StrategyKind.VALUE_MAX)
    sweep_config = replace(config, strategies=needed_strategies)
    cells = run_sweep(sweep_config, scenarios=panels)
    paths: list[Path] = []
    for sc in panels:
        path = out / f"figure_{sc.label()}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["alpha_m", "fee_liability_pct", "fee_value_pct", "V0_liability", "V0_value"]
            )
            lane_l = cells[(sc, StrategyKind.LIABILITY_MAX)]
            lane_v = cells[(sc, StrategyKind.VALUE_MAX)]
            for am, cl, cv in zip(config.alpha_m_values, lane_l, lane_v):
                writer.writerow(
                    [
                        f"{am:.6g}",
                        _format_cell(None if cl.fee is None else cl.fee * 100.0),
                        _format_cell(None if cv.fee is None else cv.fee * 100.0),
                        _format_cell(cl.V0),
                        _format_cell(cv.V0),
                    ]
                )
        paths.append(path)
    return paths


def _write_metadata(path: Path, config: ExperimentConfig, wall_time_s: float, files) -> None:
    meta = {
        "version": __version__,
        "grid": {
            "num_wealth_nodes": config.grid.num_wealth_nodes,
            "nodes_per_contract_amount": config.grid.nodes_per_contract_amount,
            "steps_per_year": config.grid.steps_per_year,
        },
        "calibration": {
            "bracket_low": config.calibration.bracket_low,
            "bracket_high": config.calibration.bracket_high,
            "tolerance": config.calibration.tolerance,
        },
        "num_scenarios": len(config.scenarios),
        "alpha_m_values": list(config.alpha_m_values),
        "strategies": [s.value for s in config.strategies],
        "workers": config.workers,
        "seed": config.seed,
        "wall_time_s": wall_time_s,
        "timestamp": time.time(),
        "files": list(files),
    }
    path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: measured {self.measured:.3e} "
            f"vs threshold {self.threshold:.3e} {self.detail}".rstrip()
        )


def _bs_band_error(market: MarketParams, fees: FeeSchedule, grid: GridConfig) -> float:
    """Sup error of the PDE call price against the closed form over
    [0.5K, 2K], normalized by the solution scale on the band."""
    from .pricer import cell_averaged_call

    contract = build_contract(T=1.0, events_per_year=1, beta=0.0)
    wgrid = build_wealth_grid(contract, market, grid)
    strike = 1.0
    payoff = cell_averaged_call(wgrid.nodes, strike)
    out = advance_interval(
        [np.ascontiguousarray(payoff[:, None])], [None], wgrid, market, fees,
        0.0, 1.0, grid.steps_per_year,
    )[0][:, 0]
    exact = np.array(
        [bs_call(w, strike, market.r, fees.alpha_tot, market.sigma, 1.0) for w in wgrid.nodes]
    )
    band = (wgrid.nodes >= 0.5 * strike) & (wgrid.nodes <= 2.0 * strike)
    return float(np.abs(out[band] - exact[band]).max() / np.abs(exact[band]).max())


def run_validation(config: ExperimentConfig) -> list[CheckOutcome]:
    """Run the invariant suite: identity, dominance, strategy coincidence,
    the analytic oracle with its convergence ratio, monotonicity, and (when
    enabled) Monte Carlo agreement."""
    checks: list[CheckOutcome] = []
    grid = config.grid
    contract = build_contract(T=5, events_per_year=config.events_per_year, beta=0.10,
                              W0=config.W0, A0=config.A0)
    market = MarketParams(r=0.05, sigma=0.20)
    fees = FeeSchedule(alpha_m=0.01, alpha_ins=0.01)

    res_l = price(contract, market, fees, StrategyKind.LIABILITY_MAX, grid,
                  with_fee_surface=True)
    res_v = price(contract, market, fees, StrategyKind.VALUE_MAX, grid)

    identity_gap = abs(res_l.V0 + res_l.M0 - contract.W0 - res_l.L0)
    checks.append(CheckOutcome("identity_construction", identity_gap <= 1e-10,
                               identity_gap, 1e-10))

    fee_surface_gap = abs(res_l.fee_surface_m0 - res_l.M0)
    checks.append(CheckOutcome("identity_fee_surface", fee_surface_gap <= 1e-4,
                               fee_surface_gap, 1e-4))

    dominance_l = res_l.L0 - res_v.L0
    checks.append(CheckOutcome("dominance_liability", dominance_l >= -1e-6,
                               dominance_l, -1e-6, "(L0 lead of liability_max)"))
    dominance_v = res_v.V0 - res_l.V0
    checks.append(CheckOutcome("dominance_value", dominance_v >= -1e-6,
                               dominance_v, -1e-6, "(V0 lead of value_max)"))

    m0_floor = min(res_l.M0, res_v.M0)
    checks.append(CheckOutcome("management_fee_nonnegative", m0_floor >= -1e-4,
                               m0_floor, -1e-4))

    row = res_v.surface_v.values[-1]
    mono = float(np.diff(row).min())
    checks.append(CheckOutcome("value_monotone_in_wealth", mono >= -1e-9,
                               mono, -1e-9))

    fee_l, _ = calibrate(contract, market, 0.0, StrategyKind.LIABILITY_MAX,
                         config.calibration, grid)
    fee_v, _ = calibrate(contract, market, 0.0, StrategyKind.VALUE_MAX,
                         config.calibration, grid)
    coincide = abs(fee_l - fee_v)
    checks.append(CheckOutcome("zero_mgmt_fee_coincidence", coincide <= 1e-4,
                               coincide, 1e-4))

    bs_market = MarketParams(r=0.05, sigma=0.20)
    bs_fees = FeeSchedule(alpha_m=0.03, alpha_ins=0.0)
    err_fine = _bs_band_error(bs_market, bs_fees, grid)
    checks.append(CheckOutcome("analytic_call_oracle", err_fine <= 1e-4, err_fine, 1e-4))
    half = GridConfig(
        num_wealth_nodes=(grid.num_wealth_nodes - 1) // 2 + 1,
        nodes_per_contract_amount=grid.nodes_per_contract_amount,
        steps_per_year=grid.steps_per_year,
    )
    err_coarse = _bs_band_error(bs_market, bs_fees, half)
    ratio = err_coarse / err_fine
    checks.append(CheckOutcome("spatial_order_two", ratio >= 3.5, ratio, 3.5,
                               "(error growth when halving nodes)"))

    if config.mc_validation:
        mc_contract = build_contract(T=10, events_per_year=config.events_per_year,
                                     beta=0.10, W0=config.W0, A0=config.A0)
        mc_market = MarketParams(r=0.01, sigma=0.30)
        mc_fees = FeeSchedule(alpha_m=0.0, alpha_ins=0.0)
        # The liability estimate has a tiny standard error, so the PDE side
        # runs at paper resolution to keep its own bias inside the MC band.
        res = price(mc_contract, mc_market, mc_fees, StrategyKind.STATIC_CONTRACTUAL,
                    GRID_PRESETS["paper"])
        v_est, l_est = simulate(
            extract_policy(res), mc_contract, mc_market, mc_fees,
            num_paths=config.mc_paths, seed=config.seed,
        )
        v_gap = abs(v_est.mean - res.V0) / max(v_est.std_error, 1e-12)
        checks.append(CheckOutcome("mc_value_agreement", v_gap <= 3.0, v_gap, 3.0,
                                   f"(|PDE-MC| in std errors, se={v_est.std_error:.2e})"))
        l_gap = abs(l_est.mean - res.L0) / max(l_est.std_error, 1e-12)
        checks.append(CheckOutcome("mc_liability_agreement", l_gap <= 3.0, l_gap, 3.0,
                                   f"(|PDE-MC| in std errors, se={l_est.std_error:.2e})"))

    return checks
