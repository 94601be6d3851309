import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmwb.errors import ValidationError
from gmwb.events import (
    ContractBehavior,
    WithdrawalDecision,
    apply_withdrawal,
    cash_flow,
    insurer_payment,
    liquidation_value,
    terminal_liability,
    terminal_value,
)
from gmwb.model import PolicyState


class TestCashFlow:
    def test_at_contractual_amount(self):
        assert cash_flow(0.10, 0.10, 0.10) == pytest.approx(0.10, abs=1e-15)

    def test_excess_penalized(self):
        assert cash_flow(0.50, 0.10, 0.10) == pytest.approx(0.46, abs=1e-15)

    def test_zero(self):
        assert cash_flow(0.0, 0.10, 0.10) == 0.0


class TestInsurerPayment:
    def test_shortfall_paid_by_insurer(self):
        assert insurer_payment(0.50, 0.20, 0.10, 0.10) == pytest.approx(0.26, abs=1e-15)

    def test_self_funded_is_zero(self):
        assert insurer_payment(0.10, 0.50, 0.10, 0.10) == pytest.approx(0.0, abs=1e-15)

    def test_penalty_surplus_negative(self):
        assert insurer_payment(0.50, 1.0, 0.10, 0.10) == pytest.approx(-0.04, abs=1e-15)


class TestApplyWithdrawal:
    def test_plain(self):
        out = apply_withdrawal(PolicyState(W=0.5, A=1.0), 0.1)
        assert (out.W, out.A) == (pytest.approx(0.4), pytest.approx(0.9))

    def test_wealth_floored(self):
        out = apply_withdrawal(PolicyState(W=0.05, A=1.0), 0.1)
        assert out.W == 0.0
        assert out.A == pytest.approx(0.9)

    def test_full_depletion(self):
        out = apply_withdrawal(PolicyState(W=0.5, A=0.2), 0.2)
        assert out.A == 0.0
        assert out.W == pytest.approx(0.3)

    def test_inadmissible_raises(self):
        with pytest.raises(ValidationError, match="admissib"):
            apply_withdrawal(PolicyState(W=0.5, A=0.2), 0.3)


class TestTerminal:
    def test_guarantee_only(self):
        assert terminal_value(PolicyState(W=0.0, A=0.1), 0.1, 0.1) == pytest.approx(0.1)

    def test_pure_wealth(self):
        assert terminal_value(PolicyState(W=0.5, A=0.0), 0.1, 0.1) == pytest.approx(0.5)

    def test_mixed(self):
        assert terminal_value(PolicyState(W=0.5, A=0.3), 0.1, 0.1) == pytest.approx(0.48)

    def test_liability_guarantee_only(self):
        assert terminal_liability(PolicyState(W=0.0, A=0.1), 0.1, 0.1) == pytest.approx(0.1)

    def test_liability_no_guarantee(self):
        assert terminal_liability(PolicyState(W=0.5, A=0.0), 0.1, 0.1) == pytest.approx(0.0)

    def test_liability_shortfall(self):
        assert terminal_liability(PolicyState(W=0.1, A=0.5), 0.1, 0.2) == pytest.approx(0.32)

    def test_liability_can_be_negative(self):
        # Forced liquidation of a large guarantee triggers penalties exceeding
        # the shortfall when wealth is ample.
        state = PolicyState(W=2.0, A=0.5)
        assert terminal_liability(state, 0.1, 0.2) < 0


pos = st.floats(min_value=0.0, max_value=5.0, allow_nan=False)
beta_st = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestIdentities:
    @given(gamma=pos, g_n=pos, beta=beta_st)
    def test_cash_flow_never_exceeds_gamma(self, gamma, g_n, beta):
        cf = cash_flow(gamma, g_n, beta)
        assert cf <= gamma + 1e-15
        if gamma <= g_n or beta == 0.0:
            assert cf == pytest.approx(gamma, abs=1e-15)

    @given(gamma=pos, w=pos, g_n=pos, beta=beta_st)
    def test_payment_plus_real_withdrawal_is_cash_flow(self, gamma, w, g_n, beta):
        lhs = insurer_payment(gamma, w, g_n, beta) + min(w, gamma)
        assert lhs == pytest.approx(cash_flow(gamma, g_n, beta), abs=1e-12)

    @given(w=pos, a=pos, g_n=pos, beta=beta_st)
    def test_terminal_liability_identity(self, w, a, g_n, beta):
        state = PolicyState(W=w, A=a)
        assert terminal_liability(state, g_n, beta) == pytest.approx(
            terminal_value(state, g_n, beta) - w, abs=1e-12
        )

    @given(w=pos, a=pos, frac=st.floats(min_value=0.0, max_value=1.0))
    def test_apply_withdrawal_never_negative(self, w, a, frac):
        gamma = frac * a
        out = apply_withdrawal(PolicyState(W=w, A=a), gamma)
        assert out.W >= 0.0
        assert out.A >= 0.0


class TestBehaviorInterface:
    def test_vectorized_matches_scalar(self):
        behavior = ContractBehavior(beta=0.1)
        gammas = np.array([0.0, 0.1, 0.5])
        out = behavior.cash_flow(gammas, 0.1)
        assert out == pytest.approx([0.0, 0.1, 0.46])

    def test_drawdown_is_nominal(self):
        assert ContractBehavior(beta=0.1).guarantee_drawdown(0.3) == 0.3

    def test_liquidation_matches_terminal_value(self):
        behavior = ContractBehavior(beta=0.1)
        assert behavior.liquidation_value(0.5, 0.3, 0.1) == pytest.approx(
            terminal_value(PolicyState(W=0.5, A=0.3), 0.1, 0.1)
        )

    def test_decision_validates(self):
        with pytest.raises(ValidationError):
            WithdrawalDecision(gamma=-0.1)
        assert WithdrawalDecision(gamma=0.25).gamma == 0.25

    def test_liquidation_vectorized(self):
        w = np.array([0.0, 0.5, 2.0])
        a = np.array([0.1, 0.3, 0.5])
        out = liquidation_value(w, a, 0.1, 0.2)
        expect = a - 0.2 * np.maximum(a - 0.1, 0) + np.maximum(w - a, 0)
        np.testing.assert_allclose(out, expect, rtol=0, atol=1e-15)
