"""Backward finite-difference engine for the wealth-axis pricing PDEs.

Between event dates both value surfaces obey the same one-dimensional
operator in wealth,

    d_t u + (r - alpha_tot) w d_w u + 0.5 sigma^2 w^2 d_ww u - r u = s(w),

with s = 0 for the policy value, s = alpha_ins * w for the net liability
(fee income accrues to the insurer), and s = -alpha_m * w for the optional
management-fee surface. Time marching is theta-scheme: Crank-Nicolson for
regular sub-steps with two fully implicit sub-steps immediately after each
event date (Rannacher start-up, damping the kinks that jump conditions
introduce). Guarantee levels do not couple between events, so one banded
solve advances every level at once.

Boundary rows: at w = 0 the operator degenerates to pure discounting, applied
exactly as exp(-r dt); at w = W_max zero curvature is imposed (the liquidation
value is asymptotically linear in wealth) with a one-sided first derivative.
First derivatives use central differences except at nodes where that would
break coefficient positivity (small w, where diffusion sigma^2 w^2 vanishes
faster than advection), which fall back to one-sided upwind differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import NumericalInstabilityError, ValidationError
from .grids import ValueSurface, WealthGrid
from .model import FeeSchedule, MarketParams

_SCHEME_THETA = {"crank_nicolson": 0.5, "implicit": 1.0}

RANNACHER_STEPS = 2


@dataclass
class TridiagonalSystem:
    """Tridiagonal system storage: lower[i], diagonal[i], upper[i] multiply
    u_{i-1}, u_i, u_{i+1}; lower[0] and upper[-1] are unused."""

    lower: np.ndarray
    diagonal: np.ndarray
    upper: np.ndarray

    def is_diagonally_dominant(self) -> bool:
        off = np.abs(self.lower) + np.abs(self.upper)
        off[0] = abs(self.upper[0])
        off[-1] = abs(self.lower[-1])
        return bool(np.all(np.abs(self.diagonal) >= off - 1e-12))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        gttrf, gttrs = get_lapack_funcs(("gttrf", "gttrs"), (self.diagonal,))
        dl, d, du, du2, ipiv, info = gttrf(self.lower[1:], self.diagonal, self.upper[:-1])
        if info != 0:
            raise ValidationError(f"tridiagonal factorization failed (info={info})")
        x, info = gttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise ValidationError(f"tridiagonal solve failed (info={info})")
        return x


def _operator_bands(wgrid: WealthGrid, market: MarketParams, fees: FeeSchedule):
    """Spatial-operator bands (lo, mid, up) with per-node positivity fallback.

    Row 0 is left zero (handled exactly by the stepper); row I drops diffusion
    and takes the first derivative one-sided toward the interior.
    """
    w = wgrid.nodes
    h = wgrid.spacing
    n = len(w)
    a = 0.5 * market.sigma**2 * w**2
    b = (market.r - fees.alpha_tot) * w

    lo = np.zeros(n)
    mid = np.zeros(n)
    up = np.zeros(n)

    interior = slice(1, n - 1)
    ai = a[interior]
    bi = b[interior]
    central_ok = 2.0 * ai >= np.abs(bi) * h

    lo_c = ai / h**2 - bi / (2.0 * h)
    up_c = ai / h**2 + bi / (2.0 * h)
    mid_c = -2.0 * ai / h**2 - market.r

    pos = bi > 0
    lo_u = np.where(pos, ai / h**2, ai / h**2 - bi / h)
    up_u = np.where(pos, ai / h**2 + bi / h, ai / h**2)
    mid_u = -2.0 * ai / h**2 - np.abs(bi) / h - market.r

    lo[interior] = np.where(central_ok, lo_c, lo_u)
    up[interior] = np.where(central_ok, up_c, up_u)
    mid[interior] = np.where(central_ok, mid_c, mid_u)

    lo[n - 1] = -b[n - 1] / h
    mid[n - 1] = b[n - 1] / h - market.r
    return lo, mid, up


class WealthStepper:
    """One backward theta-scheme sub-step, shared by every guarantee level.

    ``step`` advances a (num_wealth_nodes, k) block one sub-step of size dt;
    columns are independent surfaces rows, so a single factorized solve moves
    the whole stack. Sources are per-column-block vectors in wealth.
    """

    def __init__(
        self,
        wgrid: WealthGrid,
        market: MarketParams,
        fees: FeeSchedule,
        dt: float,
        scheme: str = "crank_nicolson",
    ):
        if dt <= 0:
            raise ValidationError(f"dt must be positive, got {dt}")
        try:
            theta = _SCHEME_THETA[scheme]
        except KeyError:
            raise ValidationError(f"unknown scheme {scheme!r}") from None
        self.wgrid = wgrid
        self.dt = dt
        self.theta = theta
        self.discount_at_zero = math.exp(-market.r * dt)

        lo, mid, up = _operator_bands(wgrid, market, fees)

        imp = TridiagonalSystem(
            lower=-theta * dt * lo,
            diagonal=1.0 - theta * dt * mid,
            upper=-theta * dt * up,
        )
        self.exp_lower = (1.0 - theta) * dt * lo
        self.exp_diag = 1.0 + (1.0 - theta) * dt * mid
        self.exp_upper = (1.0 - theta) * dt * up

        # w = 0 row: pure discounting, exact in the explicit part.
        imp.diagonal[0] = 1.0
        imp.upper[0] = 0.0
        self.exp_diag[0] = self.discount_at_zero
        self.exp_upper[0] = 0.0

        self.system = imp
        gttrf, self._gttrs = get_lapack_funcs(("gttrf", "gttrs"), (imp.diagonal,))
        dl, d, du, du2, ipiv, info = gttrf(imp.lower[1:], imp.diagonal, imp.upper[:-1])
        if info != 0:
            raise ValidationError(f"Crank-Nicolson factorization failed (info={info})")
        self._factors = (dl, d, du, du2, ipiv)

    def step(self, block: np.ndarray, sources: list[tuple[slice, np.ndarray]] | None = None) -> np.ndarray:
        """Advance one sub-step backward in time.

        ``block`` has wealth along axis 0 and one column per surface row;
        ``sources`` lists (column-slice, s(w)) pairs applied as -dt * s.
        """
        rhs = self.exp_diag[:, None] * block
        rhs[1:] += self.exp_lower[1:, None] * block[:-1]
        rhs[:-1] += self.exp_upper[:-1, None] * block[1:]
        if sources:
            for cols, s in sources:
                rhs[:, cols] -= self.dt * s[:, None]
        dl, d, du, du2, ipiv = self._factors
        out, info = self._gttrs(dl, d, du, du2, ipiv, rhs, overwrite_b=True)
        if info != 0:
            raise ValidationError(f"tridiagonal solve failed (info={info})")
        return out


def _check_finite_block(
    block: np.ndarray,
    step_index: int | None = None,
    col_offsets: np.ndarray | None = None,
) -> None:
    if np.all(np.isfinite(block)):
        return
    w_idx, col = np.argwhere(~np.isfinite(block))[0]
    a_idx = int(col)
    if col_offsets is not None:
        # Map a stacked column back to its row index within the owning surface.
        a_idx = int(col - col_offsets[np.searchsorted(col_offsets, col, side="right") - 1])
    raise NumericalInstabilityError(a_index=a_idx, w_index=int(w_idx), time_step=step_index)


def _step_surface(
    surface: ValueSurface,
    dt: float,
    market: MarketParams,
    fees: FeeSchedule,
    scheme: str,
    source: np.ndarray | None,
) -> ValueSurface:
    stepper = WealthStepper(surface.wealth, market, fees, dt, scheme)
    block = np.ascontiguousarray(surface.values.T)
    sources = [(slice(None), source)] if source is not None else None
    out = stepper.step(block, sources)
    _check_finite_block(out)
    return ValueSurface(surface.wealth, surface.guarantee, np.ascontiguousarray(out.T))


def step_value(
    surface: ValueSurface,
    dt: float,
    market: MarketParams,
    fees: FeeSchedule,
    scheme: str = "crank_nicolson",
) -> ValueSurface:
    """One sub-step of the policy-value PDE (no source term)."""
    return _step_surface(surface, dt, market, fees, scheme, None)


def step_liability(
    surface: ValueSurface,
    dt: float,
    market: MarketParams,
    fees: FeeSchedule,
    scheme: str = "crank_nicolson",
) -> ValueSurface:
    """One sub-step of the net-liability PDE with fee-income source alpha_ins * w."""
    source = fees.alpha_ins * surface.wealth.nodes
    return _step_surface(surface, dt, market, fees, scheme, source)


def num_sub_steps(t_start: float, t_end: float, steps_per_year: int) -> int:
    if t_end < t_start:
        raise ValidationError(f"t_end {t_end} before t_start {t_start}")
    if t_end == t_start:
        return 0
    return max(1, math.ceil((t_end - t_start) * steps_per_year - 1e-9))


def advance_interval(
    blocks: list[np.ndarray],
    sources: list[np.ndarray | None],
    wgrid: WealthGrid,
    market: MarketParams,
    fees: FeeSchedule,
    t_start: float,
    t_end: float,
    steps_per_year: int,
) -> list[np.ndarray]:
    """Advance several stacked surfaces from t_end back to t_start.

    ``blocks[i]`` is (num_wealth_nodes, k_i) holding post-event data at t_end;
    the first ``RANNACHER_STEPS`` sub-steps are fully implicit, the remainder
    Crank-Nicolson. Returns the blocks at t_start.
    """
    num = num_sub_steps(t_start, t_end, steps_per_year)
    if num == 0:
        return blocks
    dt = (t_end - t_start) / num

    widths = [b.shape[1] for b in blocks]
    offsets = np.concatenate([[0], np.cumsum(widths)])
    stacked = np.concatenate(blocks, axis=1)
    col_sources = [
        (slice(offsets[i], offsets[i + 1]), s)
        for i, s in enumerate(sources)
        if s is not None
    ]

    n_implicit = min(RANNACHER_STEPS, num)
    implicit = WealthStepper(wgrid, market, fees, dt, "implicit")
    cn = WealthStepper(wgrid, market, fees, dt, "crank_nicolson") if num > n_implicit else None

    for k in range(num):
        stepper = implicit if k < n_implicit else cn
        stacked = stepper.step(stacked, col_sources)
        _check_finite_block(stacked, step_index=k, col_offsets=offsets)

    return [stacked[:, offsets[i]: offsets[i + 1]] for i in range(len(blocks))]


def solve_between_events(
    surface_v: ValueSurface,
    surface_l: ValueSurface,
    t_start: float,
    t_end: float,
    market: MarketParams,
    fees: FeeSchedule,
    steps_per_year: int,
) -> tuple[ValueSurface, ValueSurface]:
    """Advance the value and liability surfaces from t_end back to t_start.

    Both surfaces are post-jump data at t_end; they share the factorized
    operator and differ only in the liability's fee-income source.
    """
    if num_sub_steps(t_start, t_end, steps_per_year) == 0:
        return surface_v, surface_l
    wgrid = surface_v.wealth
    source_l = fees.alpha_ins * wgrid.nodes
    blocks = advance_interval(
        [np.ascontiguousarray(surface_v.values.T), np.ascontiguousarray(surface_l.values.T)],
        [None, source_l],
        wgrid,
        market,
        fees,
        t_start,
        t_end,
        steps_per_year,
    )
    grid_a = surface_v.guarantee
    return (
        ValueSurface(wgrid, grid_a, np.ascontiguousarray(blocks[0].T)),
        ValueSurface(wgrid, grid_a, np.ascontiguousarray(blocks[1].T)),
    )
