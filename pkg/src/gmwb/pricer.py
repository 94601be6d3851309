"""Backward dynamic programming over withdrawal dates.

One backward pass advances the policyholder-value and insurer-net-liability
surfaces together: between event dates both obey the wealth-axis PDE; at each
event date a single withdrawal decision per (guarantee, wealth) node is chosen
by the configured strategy and applied to both surfaces, so cross quantities
such as the policy value under the liability-maximizing strategy come out of
the same pass.

Withdrawal candidates are restricted to guarantee-grid-aligned amounts, so the
post-withdrawal guarantee balance is always an exact grid level and only the
wealth axis is ever interpolated. Ties in the argmax break toward the smallest
withdrawal, making policies deterministic across platforms.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .events import ContractBehavior, WithdrawalDecision
from .grids import (
    GridConfig,
    GuaranteeGrid,
    ValueSurface,
    WealthGrid,
    build_guarantee_grid,
    build_wealth_grid,
)
from .model import ContractSpec, FeeSchedule, MarketParams
from .pde import advance_interval, num_sub_steps


class StrategyKind(enum.Enum):
    """Withdrawal strategy applied at every event date."""

    VALUE_MAX = "value_max"
    LIABILITY_MAX = "liability_max"
    STATIC_CONTRACTUAL = "static_contractual"

    @classmethod
    def from_name(cls, name: str) -> "StrategyKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValidationError(f"unknown strategy {name!r}; expected one of "
                              f"{[k.value for k in cls]}")


@dataclass
class PolicyTable:
    """Frozen withdrawal decisions: one lattice-aligned amount per event and node.

    ``gamma_steps[n-1][j, i]`` counts guarantee-grid steps withdrawn at event n
    in state (a_j, w_i); the amount is ``guarantee.levels[steps]``.
    """

    wealth: WealthGrid
    guarantee: GuaranteeGrid
    event_times: tuple[float, ...]
    gamma_steps: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.event_times) != len(self.gamma_steps):
            raise ValidationError("one decision table required per interior event")
        for tbl in self.gamma_steps:
            if tbl.shape != (self.guarantee.num_levels, len(self.wealth.nodes)):
                raise ValidationError("policy table shape does not match grids")

    @property
    def num_events(self) -> int:
        return len(self.gamma_steps)

    def gamma_at(self, n: int) -> np.ndarray:
        """Withdrawal amounts for interior event n (1-based) on the full grid."""
        return self.guarantee.levels[self.gamma_steps[n - 1]]

    def lookup_steps(self, n: int, a_indices: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Vectorized policy lookup: interpolate the stored amounts linearly in
        wealth at exact guarantee rows, then snap to the nearest admissible
        lattice candidate."""
        table = self.gamma_at(n)
        nodes = self.wealth.nodes
        h = nodes[1]
        pos = np.clip(w / h, 0.0, len(nodes) - 1.0)
        idx = np.minimum(pos.astype(np.intp), len(nodes) - 2)
        frac = pos - idx
        gamma_raw = table[a_indices, idx] * (1.0 - frac) + table[a_indices, idx + 1] * frac
        steps = np.rint(gamma_raw / self.guarantee.spacing).astype(np.intp)
        return np.clip(steps, 0, a_indices)

    def decision_at(self, n: int, w: float, a_level: float) -> WithdrawalDecision:
        j = self.guarantee.index_of(a_level)
        steps = self.lookup_steps(n, np.array([j]), np.array([float(w)]))
        return WithdrawalDecision(gamma=float(self.guarantee.levels[steps[0]]))

    def copy(self) -> "PolicyTable":
        return PolicyTable(
            wealth=self.wealth,
            guarantee=self.guarantee,
            event_times=self.event_times,
            gamma_steps=[tbl.copy() for tbl in self.gamma_steps],
        )


@dataclass
class Diagnostics:
    num_wealth_nodes: int
    num_guarantee_levels: int
    steps_per_year: int
    total_sub_steps: int
    w_max: float
    wall_time_s: float


@dataclass
class PricingResult:
    """Time-0 outputs of one backward pass.

    M0 is defined through the identity M = L + W - V (the risk-neutral value
    of future management fees); ``fee_surface_m0`` is the independently evolved
    fee surface's value when the debug mode is enabled.
    """

    V0: float
    L0: float
    M0: float
    policy: PolicyTable
    diagnostics: Diagnostics
    surface_v: ValueSurface
    surface_l: ValueSurface
    fee_surface_m0: float | None = None


def candidate_withdrawals(a_level: float, G_n: float, grid: GuaranteeGrid) -> np.ndarray:
    """Admissible lattice-aligned withdrawals at guarantee balance ``a_level``.

    Every amount moves the balance onto another grid level: gamma = a - a_k
    for each level a_k <= a. Always contains 0 and the full balance; contains
    min(G_n, a) exactly because the grid subdivides the contractual amount.
    """
    j = grid.index_of(a_level)
    return grid.levels[: j + 1].copy()


def cell_averaged_call(nodes: np.ndarray, kink: float) -> np.ndarray:
    """Cell averages of max(w - kink, 0), interior nodes only.

    Averaging the terminal data over each node's cell removes the O(h^2)
    quantization error a kink placed on (or near) a node otherwise injects
    into Crank-Nicolson; boundary nodes keep their pointwise values.
    """
    h = nodes[1]
    out = np.maximum(nodes - kink, 0.0)
    lo = nodes[1:-1] - 0.5 * h
    hi = nodes[1:-1] + 0.5 * h
    straddles = (lo < kink) & (kink < hi)
    if np.any(straddles):
        out[1:-1][straddles] = (hi[straddles] - kink) ** 2 / (2.0 * h)
    return out


def _terminal_blocks(
    wgrid: WealthGrid,
    agrid: GuaranteeGrid,
    behavior: ContractBehavior,
    G_N: float,
    smooth: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Terminal V and L data, wealth along axis 0, one column per guarantee level."""
    w = wgrid.nodes
    levels = agrid.levels
    if smooth:
        excess = np.column_stack([cell_averaged_call(w, a) for a in levels])
    else:
        excess = np.maximum(w[:, None] - levels[None, :], 0.0)
    guaranteed = levels - behavior.beta * np.maximum(levels - G_N, 0.0)
    v_block = guaranteed[None, :] + excess
    l_block = v_block - w[:, None]
    return v_block, l_block


def _apply_event_blocks(
    blocks: list[np.ndarray],
    strategy: StrategyKind,
    wgrid: WealthGrid,
    agrid: GuaranteeGrid,
    behavior: ContractBehavior,
    G_n: float,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Apply one event date to stacked surfaces (wealth on axis 0).

    blocks = [V, L] or [V, L, M]; returns post-event blocks and the chosen
    lattice-step table of shape (num_levels, num_wealth_nodes).
    """
    v_block, l_block = blocks[0], blocks[1]
    m_block = blocks[2] if len(blocks) > 2 else None

    w = wgrid.nodes
    n_w = len(w)
    h = w[1]
    levels = agrid.levels
    n_a = len(levels)

    # Work in (rows=a, cols=w) orientation for contiguity of per-level rows.
    V = np.ascontiguousarray(v_block.T)
    L = np.ascontiguousarray(l_block.T)
    M = np.ascontiguousarray(m_block.T) if m_block is not None else None

    base_pos = w / h

    def shifted_query(gamma: float):
        pos = np.maximum(base_pos - gamma / h, 0.0)
        idx = np.minimum(pos.astype(np.intp), n_w - 2)
        frac = pos - idx
        return idx, frac

    def gather(block: np.ndarray, rows, idx, frac):
        return block[rows, idx] * (1.0 - frac) + block[rows, idx + 1] * frac

    if strategy is StrategyKind.STATIC_CONTRACTUAL:
        k_g = int(round(G_n / agrid.spacing))
        if k_g >= n_a or abs(levels[k_g] - G_n) > 1e-9 * max(1.0, G_n):
            raise ValidationError("contractual amount is not on the guarantee lattice")
        steps = np.minimum(np.arange(n_a, dtype=np.int32), k_g)[:, None] * np.ones(
            (1, n_w), dtype=np.int32
        )
        v_new = np.empty_like(V)
        l_new = np.empty_like(L)
        m_new = np.empty_like(M) if M is not None else None
        # Rows below the contractual amount liquidate their full balance.
        for j in range(k_g):
            gamma = levels[j]
            cf = float(behavior.cash_flow(gamma, G_n))
            idx, frac = shifted_query(gamma)
            v_new[j] = cf + gather(V, 0, idx, frac)
            l_new[j] = cf - np.minimum(w, gamma) + gather(L, 0, idx, frac)
            if M is not None:
                m_new[j] = gather(M, 0, idx, frac)
        # Remaining rows withdraw exactly G_n.
        gamma = levels[k_g]
        cf = float(behavior.cash_flow(gamma, G_n))
        idx, frac = shifted_query(gamma)
        rows = slice(0, n_a - k_g)
        v_new[k_g:] = cf + gather(V, rows, idx, frac)
        l_new[k_g:] = cf - np.minimum(w, gamma) + gather(L, rows, idx, frac)
        if M is not None:
            m_new[k_g:] = gather(M, rows, idx, frac)
        out = [np.ascontiguousarray(v_new.T), np.ascontiguousarray(l_new.T)]
        if M is not None:
            out.append(np.ascontiguousarray(m_new.T))
        return out, steps

    best = np.empty_like(V)
    v_new = np.empty_like(V)
    l_new = np.empty_like(L)
    m_new = np.empty_like(M) if M is not None else None
    steps = np.zeros((n_a, n_w), dtype=np.int32)

    maximize_liability = strategy is StrategyKind.LIABILITY_MAX
    for c in range(n_a):
        gamma = levels[c]
        cf = float(behavior.cash_flow(gamma, G_n))
        pay = cf - np.minimum(w, gamma)
        if c == 0:
            # Zero withdrawal: no displacement, no cash flow.
            best[:] = L if maximize_liability else V
            v_new[:] = V
            l_new[:] = L
            if M is not None:
                m_new[:] = M
            continue

        idx, frac = shifted_query(gamma)
        rows = slice(0, n_a - c)
        v_cand = cf + gather(V, rows, idx, frac)
        l_cand = pay + gather(L, rows, idx, frac)
        obj = l_cand if maximize_liability else v_cand

        view = best[c:]
        better = obj > view
        view[better] = obj[better]
        v_new[c:][better] = v_cand[better]
        l_new[c:][better] = l_cand[better]
        steps[c:][better] = c
        if M is not None:
            m_new[c:][better] = gather(M, rows, idx, frac)[better]

    out = [np.ascontiguousarray(v_new.T), np.ascontiguousarray(l_new.T)]
    if M is not None:
        out.append(np.ascontiguousarray(m_new.T))
    return out, steps


def apply_event(
    surface_v: ValueSurface,
    surface_l: ValueSurface,
    n: int,
    strategy: StrategyKind,
    contract: ContractSpec,
) -> tuple[ValueSurface, ValueSurface, np.ndarray]:
    """Apply the withdrawal decision at interior event n (1-based) to both
    surfaces, returning the pre-event surfaces and the chosen lattice steps."""
    if not 1 <= n <= contract.num_events - 1:
        raise ValidationError(f"interior event index must lie in [1, {contract.num_events - 1}], got {n}")
    behavior = ContractBehavior(beta=contract.penalty_beta)
    blocks = [
        np.ascontiguousarray(surface_v.values.T),
        np.ascontiguousarray(surface_l.values.T),
    ]
    out, steps = _apply_event_blocks(
        blocks, strategy, surface_v.wealth, surface_v.guarantee, behavior,
        contract.contractual_amounts[n - 1],
    )
    return (
        ValueSurface(surface_v.wealth, surface_v.guarantee, np.ascontiguousarray(out[0].T)),
        ValueSurface(surface_l.wealth, surface_l.guarantee, np.ascontiguousarray(out[1].T)),
        steps,
    )


def price(
    contract: ContractSpec,
    market: MarketParams,
    fees: FeeSchedule,
    strategy: StrategyKind,
    grid_config: GridConfig | None = None,
    *,
    with_fee_surface: bool = False,
    terminal_smoothing: bool = True,
    wealth_grid: WealthGrid | None = None,
    guarantee_grid: GuaranteeGrid | None = None,
) -> PricingResult:
    """Run the joint backward recursion and report time-0 values.

    ``with_fee_surface`` additionally evolves a surface that accumulates
    discounted management fees directly (zero terminal data, source alpha_m * w,
    pure state displacement at events); its time-0 value must agree with
    L0 + W0 - V0 up to grid error and is exposed for verification.
    """
    t0 = time.perf_counter()
    cfg = grid_config or GridConfig()
    wgrid = wealth_grid if wealth_grid is not None else build_wealth_grid(contract, market, cfg)
    agrid = guarantee_grid if guarantee_grid is not None else build_guarantee_grid(contract, cfg)
    behavior = ContractBehavior(beta=contract.penalty_beta)

    v_block, l_block = _terminal_blocks(
        wgrid, agrid, behavior, contract.contractual_amounts[-1], terminal_smoothing
    )
    blocks = [v_block, l_block]
    sources: list[np.ndarray | None] = [None, fees.alpha_ins * wgrid.nodes]
    if with_fee_surface:
        blocks.append(np.zeros_like(v_block))
        sources.append(-fees.alpha_m * wgrid.nodes)

    times = (0.0,) + contract.event_times
    n_events = contract.num_events
    policy_slices: dict[int, np.ndarray] = {}
    total_steps = 0

    for n in range(n_events, 0, -1):
        t_lo, t_hi = times[n - 1], times[n]
        total_steps += num_sub_steps(t_lo, t_hi, cfg.steps_per_year)
        blocks = advance_interval(
            blocks, sources, wgrid, market, fees, t_lo, t_hi, cfg.steps_per_year
        )
        if n - 1 >= 1:
            blocks, steps = _apply_event_blocks(
                blocks, strategy, wgrid, agrid, behavior,
                contract.contractual_amounts[n - 2],
            )
            policy_slices[n - 1] = steps

    j0 = agrid.num_levels - 1
    i0 = wgrid.w0_index
    V0 = float(blocks[0][i0, j0])
    L0 = float(blocks[1][i0, j0])
    M0 = L0 + contract.W0 - V0
    fee_m0 = float(blocks[2][i0, j0]) if with_fee_surface else None

    policy = PolicyTable(
        wealth=wgrid,
        guarantee=agrid,
        event_times=contract.event_times[: n_events - 1],
        gamma_steps=[policy_slices[n] for n in range(1, n_events)],
    )
    diag = Diagnostics(
        num_wealth_nodes=len(wgrid.nodes),
        num_guarantee_levels=agrid.num_levels,
        steps_per_year=cfg.steps_per_year,
        total_sub_steps=total_steps,
        w_max=wgrid.w_max,
        wall_time_s=time.perf_counter() - t0,
    )
    return PricingResult(
        V0=V0,
        L0=L0,
        M0=M0,
        policy=policy,
        diagnostics=diag,
        surface_v=ValueSurface(wgrid, agrid, np.ascontiguousarray(blocks[0].T)),
        surface_l=ValueSurface(wgrid, agrid, np.ascontiguousarray(blocks[1].T)),
        fee_surface_m0=fee_m0,
    )


def extract_policy(result: PricingResult) -> PolicyTable:
    """Deep copy of the frozen per-event decision tables."""
    return result.policy.copy()
