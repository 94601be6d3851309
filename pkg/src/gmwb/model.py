"""Contract, market, and fee parameters for a GMWB rider.

The contract pays the holder a contractual amount G_n at each event date;
withdrawals above G_n incur a proportional penalty. Wealth is invested in an
equity index and charged continuous management and insurance fees. All values
are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class MarketParams:
    """Constant risk-neutral market: short rate ``r`` and index volatility ``sigma``."""

    r: float
    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.r):
            raise ValidationError(f"r must be finite, got {self.r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class FeeSchedule:
    """Constant per-annum fee rates.

    ``alpha_m`` is paid to an external fund manager and must be nonnegative;
    ``alpha_ins`` funds the guarantee and may be negative (calibrated fair fees
    can fall below zero under value-maximizing withdrawals).
    """

    alpha_m: float
    alpha_ins: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha_m) and self.alpha_m >= 0):
            raise ValidationError(f"alpha_m must be >= 0, got {self.alpha_m}")
        if not math.isfinite(self.alpha_ins):
            raise ValidationError(f"alpha_ins must be finite, got {self.alpha_ins}")

    @property
    def alpha_tot(self) -> float:
        return self.alpha_m + self.alpha_ins


def total_fee(fees: FeeSchedule) -> float:
    """Total continuous fee rate drained from the wealth account."""
    return fees.alpha_tot


@dataclass(frozen=True)
class ContractSpec:
    """GMWB terms: event schedule, contractual amounts, penalty, initial accounts.

    ``event_times`` holds t_1 < ... < t_N = maturity (t_0 = 0 carries no
    withdrawal). ``contractual_amounts[n-1]`` is the penalty-free entitlement
    G_n at the n-th event.
    """

    maturity: float
    event_times: tuple[float, ...]
    contractual_amounts: tuple[float, ...]
    penalty_beta: float
    W0: float
    A0: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.maturity) and self.maturity > 0):
            raise ValidationError(f"maturity must be positive, got {self.maturity}")
        if not self.event_times:
            raise ValidationError("event_times must be nonempty")
        if len(self.event_times) != len(self.contractual_amounts):
            raise ValidationError(
                "event_times and contractual_amounts must have equal length, got "
                f"{len(self.event_times)} vs {len(self.contractual_amounts)}"
            )
        prev = 0.0
        for t in self.event_times:
            if t <= prev:
                raise ValidationError(f"event_times must be strictly increasing from 0, got {self.event_times}")
            prev = t
        if self.event_times[-1] != self.maturity:
            raise ValidationError(
                f"last event time {self.event_times[-1]} must equal maturity {self.maturity}"
            )
        if any(g < 0 for g in self.contractual_amounts):
            raise ValidationError("contractual_amounts must be nonnegative")
        if not 0.0 <= self.penalty_beta <= 1.0:
            raise ValidationError(f"penalty_beta must lie in [0, 1], got {self.penalty_beta}")
        if not (math.isfinite(self.W0) and self.W0 > 0):
            raise ValidationError(f"W0 must be positive, got {self.W0}")
        if not (math.isfinite(self.A0) and self.A0 > 0):
            raise ValidationError(f"A0 must be positive, got {self.A0}")

    @property
    def num_events(self) -> int:
        return len(self.event_times)


def build_contract(
    T: float,
    events_per_year: int,
    beta: float,
    W0: float = 1.0,
    A0: float = 1.0,
) -> ContractSpec:
    """Build the standard contract: N = T * events_per_year evenly spaced events,
    first at the end of the first period, last at maturity, with G_n = A0 / N so
    the guarantee returns the initial investment over the contract's life.
    """
    if not (math.isfinite(T) and T > 0):
        raise ValidationError(f"T must be positive, got {T}")
    if events_per_year < 1 or int(events_per_year) != events_per_year:
        raise ValidationError(f"events_per_year must be a positive integer, got {events_per_year}")
    if not (math.isfinite(W0) and W0 > 0):
        raise ValidationError(f"W0 must be positive, got {W0}")
    if not (math.isfinite(A0) and A0 > 0):
        raise ValidationError(f"A0 must be positive, got {A0}")
    n_float = T * events_per_year
    N = round(n_float)
    if N < 1 or abs(n_float - N) > 1e-9:
        raise ValidationError(
            f"T * events_per_year must be a whole number of events, got {n_float}"
        )
    times = tuple(n / events_per_year for n in range(1, N + 1))
    g = A0 / N
    return ContractSpec(
        maturity=float(T),
        event_times=times,
        contractual_amounts=(g,) * N,
        penalty_beta=float(beta),
        W0=float(W0),
        A0=float(A0),
    )


@dataclass(frozen=True)
class PolicyState:
    """Point state of the two accounts: wealth ``W`` and remaining guarantee ``A``."""

    W: float
    A: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.W) and self.W >= 0):
            raise ValidationError(f"W must be >= 0, got {self.W}")
        if not (math.isfinite(self.A) and self.A >= 0):
            raise ValidationError(f"A must be >= 0, got {self.A}")
