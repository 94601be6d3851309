"""Closed-form Black-Scholes values used as independent oracles.

Implemented from the standard formulas via the error function only; nothing
here touches the finite-difference machinery, so PDE output can be checked
against a genuinely separate computation.
"""

from __future__ import annotations

import math


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bs_call(spot: float, strike: float, r: float, q: float, sigma: float, T: float) -> float:
    """European call under continuous dividend yield q."""
    if T <= 0 or sigma <= 0:
        return max(spot - strike, 0.0)
    if spot <= 0:
        return 0.0
    if strike <= 0:
        return spot * math.exp(-q * T) - strike * math.exp(-r * T)
    vol = sigma * math.sqrt(T)
    d1 = (math.log(spot / strike) + (r - q + 0.5 * sigma * sigma) * T) / vol
    d2 = d1 - vol
    return spot * math.exp(-q * T) * norm_cdf(d1) - strike * math.exp(-r * T) * norm_cdf(d2)


def bs_put(spot: float, strike: float, r: float, q: float, sigma: float, T: float) -> float:
    """European put via put-call parity."""
    call = bs_call(spot, strike, r, q, sigma, T)
    return call - spot * math.exp(-q * T) + strike * math.exp(-r * T)


def discounted_fee_value(w: float, rate: float, alpha_tot: float, T: float) -> float:
    """Risk-neutral value at time 0 of continuous fees ``rate * W(s)`` over [0, T].

    With total drain alpha_tot on wealth, E[e^{-r s} W(s)] = w e^{-alpha_tot s},
    so the value is rate * w * (1 - e^{-alpha_tot T}) / alpha_tot.
    """
    if alpha_tot == 0.0:
        return rate * w * T
    return rate * w * (1.0 - math.exp(-alpha_tot * T)) / alpha_tot
