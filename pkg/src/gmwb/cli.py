"""Command-line front end.

Subcommands:
  tables    run the scenario sweep and write the four CSV tables
  figures   write per-panel series CSVs and render the PNG figures
  validate  run the invariant suite; nonzero exit on any failure
  price     price one configuration and print V0 / L0 / M0
  fair-fee  calibrate the fair insurance fee for one configuration

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .calibrate import calibrate
from .errors import ConfigurationError, NoRootError, ValidationError
from .experiment import (
    ExperimentConfig,
    config_from_json,
    emit_figure_data,
    figure_scenarios,
    run_tables,
    run_validation,
)
from .grids import GRID_PRESETS
from .model import FeeSchedule, MarketParams, build_contract
from .pricer import StrategyKind, price


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON experiment configuration (defaults reproduce the study)")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory (default: ./out)")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel worker processes")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for Monte Carlo validation paths")
    parser.add_argument("--grid-preset", choices=sorted(GRID_PRESETS), default=None,
                        help="override grid resolution (fast|paper|fine)")


def _add_single_config(parser: argparse.ArgumentParser, with_alpha_ins: bool) -> None:
    parser.add_argument("--r", type=float, required=True, help="risk-free rate, decimal")
    parser.add_argument("--sigma", type=float, required=True, help="volatility, decimal")
    parser.add_argument("--beta", type=float, required=True, help="penalty rate, decimal")
    parser.add_argument("--T", type=float, required=True, help="maturity, years")
    parser.add_argument("--alpha-m", type=float, default=0.0, help="management fee, decimal")
    if with_alpha_ins:
        parser.add_argument("--alpha-ins", type=float, required=True,
                            help="insurance fee, decimal")
    parser.add_argument("--strategy", default="liability_max",
                        choices=[k.value for k in StrategyKind])


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = config_from_json(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.grid_preset:
        overrides["grid"] = GRID_PRESETS[args.grid_preset]
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    return dataclasses.replace(config, **overrides) if overrides else config


def _cmd_tables(args: argparse.Namespace) -> int:
    config = _load_config(args)
    written = run_tables(config, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_figures(args: argparse.Namespace) -> int:
    config = _load_config(args)
    paths = emit_figure_data(config, args.out)
    for path in paths:
        print(f"wrote {path}")
    if not args.no_plots:
        from .figures import render_all

        panels = figure_scenarios(config)
        index = {
            (sc.r, sc.sigma, sc.beta, sc.T): path
            for sc, path in zip(panels, paths)
        }
        for png in render_all(args.out, index):
            print(f"rendered {png}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if args.config is None:
        # Standalone validation defaults: fast grid, MC agreement enabled.
        config = dataclasses.replace(
            config,
            grid=GRID_PRESETS[args.grid_preset or "fast"],
            mc_validation=True,
        )
    checks = run_validation(config)
    for check in checks:
        print(check.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def _cmd_price(args: argparse.Namespace) -> int:
    config = _load_config(args)
    contract = build_contract(T=args.T, events_per_year=config.events_per_year,
                              beta=args.beta, W0=config.W0, A0=config.A0)
    market = MarketParams(r=args.r, sigma=args.sigma)
    fees = FeeSchedule(alpha_m=args.alpha_m, alpha_ins=args.alpha_ins)
    result = price(contract, market, fees, StrategyKind.from_name(args.strategy),
                   config.grid)
    print(f"V0 = {result.V0:.6f}")
    print(f"L0 = {result.L0:.6f}")
    print(f"M0 = {result.M0:.6f}")
    print(f"(grid {result.diagnostics.num_wealth_nodes} wealth nodes x "
          f"{result.diagnostics.num_guarantee_levels} guarantee levels, "
          f"{result.diagnostics.wall_time_s:.2f}s)")
    return 0


def _cmd_fair_fee(args: argparse.Namespace) -> int:
    config = _load_config(args)
    contract = build_contract(T=args.T, events_per_year=config.events_per_year,
                              beta=args.beta, W0=config.W0, A0=config.A0)
    market = MarketParams(r=args.r, sigma=args.sigma)
    fee, result = calibrate(contract, market, args.alpha_m,
                            StrategyKind.from_name(args.strategy),
                            config.calibration, config.grid)
    print(f"fair alpha_ins = {fee * 100:.4f}%")
    print(f"V0 at fair fee = {result.V0:.6f}")
    print(f"L0 residual    = {result.L0:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmwb", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_tables = sub.add_parser("tables", help="write fair-fee and policy-value tables")
    _add_common(p_tables)
    p_tables.set_defaults(func=_cmd_tables)

    p_figures = sub.add_parser("figures", help="write figure series and render PNGs")
    _add_common(p_figures)
    p_figures.add_argument("--no-plots", action="store_true",
                           help="emit series CSVs only")
    p_figures.set_defaults(func=_cmd_figures)

    p_validate = sub.add_parser("validate", help="run the invariant suite")
    _add_common(p_validate)
    p_validate.set_defaults(func=_cmd_validate)

    p_price = sub.add_parser("price", help="price one configuration")
    _add_common(p_price)
    _add_single_config(p_price, with_alpha_ins=True)
    p_price.set_defaults(func=_cmd_price)

    p_fee = sub.add_parser("fair-fee", help="calibrate one fair fee")
    _add_common(p_fee)
    _add_single_config(p_fee, with_alpha_ins=False)
    p_fee.set_defaults(func=_cmd_fair_fee)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return 2
    except NoRootError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
