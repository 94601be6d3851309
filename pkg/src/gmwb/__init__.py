"""GMWB rider pricing by backward dynamic programming with PDE transport.

Prices the policyholder value and the insurer net liability of a Guaranteed
Minimum Withdrawal Benefit rider under optimal (value- or liability-
maximizing) or contractual withdrawal behavior, calibrates the fair insurance
fee, and cross-checks the PDE pipeline against closed forms and Monte Carlo.
"""

__version__ = "0.1.0"

from .calibrate import CalibrationSettings, calibrate, solve_fair_fee
from .errors import (
    ConfigurationError,
    NoRootError,
    NumericalInstabilityError,
    ValidationError,
)
from .events import (
    ContractBehavior,
    WithdrawalDecision,
    apply_withdrawal,
    cash_flow,
    insurer_payment,
    terminal_liability,
    terminal_value,
)
from .grids import (
    GRID_PRESETS,
    GridConfig,
    GuaranteeGrid,
    ValueSurface,
    WealthGrid,
    build_guarantee_grid,
    build_wealth_grid,
    interpolate_w,
)
from .mc import MCEstimate, MCPathState, simulate
from .model import (
    ContractSpec,
    FeeSchedule,
    MarketParams,
    PolicyState,
    build_contract,
    total_fee,
)
from .pde import solve_between_events, step_liability, step_value
from .pricer import (
    PolicyTable,
    PricingResult,
    StrategyKind,
    apply_event,
    candidate_withdrawals,
    extract_policy,
    price,
)

__all__ = [
    "CalibrationSettings",
    "ConfigurationError",
    "ContractBehavior",
    "ContractSpec",
    "FeeSchedule",
    "GRID_PRESETS",
    "GridConfig",
    "GuaranteeGrid",
    "MCEstimate",
    "MCPathState",
    "MarketParams",
    "NoRootError",
    "NumericalInstabilityError",
    "PolicyState",
    "PolicyTable",
    "PricingResult",
    "StrategyKind",
    "ValidationError",
    "ValueSurface",
    "WealthGrid",
    "WithdrawalDecision",
    "apply_event",
    "apply_withdrawal",
    "build_contract",
    "build_guarantee_grid",
    "build_wealth_grid",
    "calibrate",
    "candidate_withdrawals",
    "cash_flow",
    "extract_policy",
    "insurer_payment",
    "interpolate_w",
    "price",
    "simulate",
    "solve_between_events",
    "solve_fair_fee",
    "step_liability",
    "step_value",
    "terminal_liability",
    "terminal_value",
    "total_fee",
]
