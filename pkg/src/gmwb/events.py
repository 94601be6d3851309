"""Cash-flow, account-update, terminal, and insurer-payment functions.

These are the contract-specific pieces applied at event dates and maturity:
a nominal withdrawal gamma pays the holder gamma less a penalty on any excess
over the contractual amount, the guarantee account drops by the full nominal
amount, and the wealth account drops by the same amount floored at zero. At
maturity the remaining guarantee is force-liquidated as one final (penalized)
withdrawal plus any wealth left over.

All functions are pure and accept scalars or numpy arrays. The shipped forms
can be swapped for other contract variants via :class:`ContractBehavior`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import PolicyState


@dataclass(frozen=True)
class WithdrawalDecision:
    """A nominal withdrawal amount chosen at one event date."""

    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma >= 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")


def cash_flow(gamma, G_n, beta):
    """Cash received by the holder: gamma - beta * max(gamma - G_n, 0)."""
    return gamma - beta * np.maximum(gamma - G_n, 0.0)


def insurer_payment(gamma, W_pre, G_n, beta):
    """Insurer's out-of-pocket payment: cash flow less the real withdrawal.

    The real withdrawal min(W_pre, gamma) comes from the wealth account; the
    insurer covers any shortfall and keeps any penalty surplus (the result may
    be negative).
    """
    return cash_flow(gamma, G_n, beta) - np.minimum(W_pre, gamma)


def apply_withdrawal(state: PolicyState, gamma: float) -> PolicyState:
    """Post-withdrawal accounts: A drops by gamma, W by gamma floored at 0."""
    if gamma < 0 or gamma > state.A + 1e-12 * max(1.0, state.A):
        raise ValidationError(
            f"gamma={gamma} violates admissibility 0 <= gamma <= A={state.A}"
        )
    return PolicyState(W=max(state.W - gamma, 0.0), A=max(state.A - gamma, 0.0))


def liquidation_value(W, A, G_N, beta):
    """Maturity cash flow: forced nominal withdrawal of the full guarantee
    balance (penalized above G_N) plus liquidation of any wealth in excess."""
    return A - beta * np.maximum(A - G_N, 0.0) + np.maximum(W - A, 0.0)


def terminal_value(state: PolicyState, G_N: float, beta: float) -> float:
    """Holder's liquidation cash flow at maturity for a point state."""
    return float(liquidation_value(state.W, state.A, G_N, beta))


def terminal_liability(state: PolicyState, G_N: float, beta: float) -> float:
    """Insurer's terminal payment: the final value not covered by wealth.

    Negative when penalties on the forced liquidation exceed the guarantee
    shortfall, in which case the insurer is paid.
    """
    return terminal_value(state, G_N, beta) - state.W


@dataclass(frozen=True)
class ContractBehavior:
    """Paper-standard GMWB event behavior parameterized by the penalty rate.

    Kept as one swap point: alternative contracts (different cash flows,
    guarantee drawdowns, or liquidation rules) implement the same four
    methods and plug into the pricer unchanged.
    """

    beta: float

    def cash_flow(self, gamma, G_n):
        return cash_flow(gamma, G_n, self.beta)

    def insurer_payment(self, gamma, W_pre, G_n):
        return insurer_payment(gamma, W_pre, G_n, self.beta)

    def guarantee_drawdown(self, gamma):
        """Amount removed from the guarantee account (here the full nominal)."""
        return gamma

    def liquidation_value(self, W, A, G_N):
        return liquidation_value(W, A, G_N, self.beta)
