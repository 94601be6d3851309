"""Fair insurance fee calibration: solve L(0) = 0 for the constant fee rate.

The insurance fee enters the pricing problem twice, through the total fee in
the PDE drift and through the liability's fee-income source; both are rewired
on every evaluation. The solve brackets the root and refines with Brent's
method (bisection plus secant/inverse-quadratic steps that never leave the
bracket), which tolerates the non-monotone liability profiles that the
value-maximization strategy can produce.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import NoRootError, ValidationError
from .grids import GridConfig
from .model import ContractSpec, FeeSchedule, MarketParams
from .pricer import PricingResult, StrategyKind, price

BRACKET_LIMIT = (-0.10, 0.60)


@dataclass(frozen=True)
class CalibrationSettings:
    """Bracket and stopping controls for the fee solve."""

    bracket_low: float = -0.05
    bracket_high: float = 0.40
    tolerance: float = 1e-6
    max_iterations: int = 100

    def __post_init__(self) -> None:
        if not self.bracket_low < self.bracket_high:
            raise ValidationError(
                f"bracket_low {self.bracket_low} must be below bracket_high {self.bracket_high}"
            )
        if not self.tolerance > 0:
            raise ValidationError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")


def _expand_bracket(f, low: float, high: float, f_low: float, f_high: float):
    """Widen the bracket geometrically until the liability changes sign, up to
    the hard limits; raises NoRootError if none is found."""
    lim_low, lim_high = BRACKET_LIMIT
    width = high - low
    while f_low * f_high > 0:
        if low <= lim_low and high >= lim_high:
            raise NoRootError(low, high, f_low, f_high)
        width *= 2.0
        low = max(lim_low, high - width)
        high = min(lim_high, low + width)
        f_low = f(low)
        f_high = f(high)
    return low, high, f_low, f_high


def solve_fair_fee(
    contract: ContractSpec,
    market: MarketParams,
    alpha_m: float,
    strategy: StrategyKind,
    settings: CalibrationSettings | None = None,
    grid_config: GridConfig | None = None,
) -> float:
    """Constant insurance fee rate making the initial net liability zero."""
    fee, _ = calibrate(contract, market, alpha_m, strategy, settings, grid_config)
    return fee


def calibrate(
    contract: ContractSpec,
    market: MarketParams,
    alpha_m: float,
    strategy: StrategyKind,
    settings: CalibrationSettings | None = None,
    grid_config: GridConfig | None = None,
    *,
    hint: float | None = None,
    hint_margin: float = 0.01,
) -> tuple[float, PricingResult]:
    """Solve the fair-fee condition and return (fee, pricing at the fee).

    ``hint`` (for example a neighboring sweep cell's fee) seeds a narrow
    bracket around the expected root; if it fails to bracket, the solve falls
    back to the configured bracket with geometric expansion.
    """
    cal = settings or CalibrationSettings()
    cache: dict[float, PricingResult] = {}

    def evaluate(alpha_ins: float) -> float:
        key = float(alpha_ins)
        if key not in cache:
            cache[key] = price(
                contract, market, FeeSchedule(alpha_m, key), strategy, grid_config
            )
        return cache[key].L0

    low, high = cal.bracket_low, cal.bracket_high
    f_low = f_high = None
    if hint is not None:
        lo_h, hi_h = hint - hint_margin, hint + hint_margin
        fl, fh = evaluate(lo_h), evaluate(hi_h)
        if fl * fh <= 0:
            low, high, f_low, f_high = lo_h, hi_h, fl, fh

    if f_low is None:
        f_low, f_high = evaluate(low), evaluate(high)
        if f_low * f_high > 0:
            low, high, f_low, f_high = _expand_bracket(evaluate, low, high, f_low, f_high)

    root = brentq(
        evaluate,
        low,
        high,
        xtol=cal.tolerance,
        maxiter=cal.max_iterations,
    )
    root = float(root)
    if root not in cache:
        cache[root] = price(
            contract, market, FeeSchedule(alpha_m, root), strategy, grid_config
        )
    return root, cache[root]
