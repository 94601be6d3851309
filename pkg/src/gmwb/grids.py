"""Wealth- and guarantee-axis discretizations and wealth interpolation.

The wealth grid is uniform on [0, W_max] so that W = 0 (where the diffusion
degenerates and withdrawals can pin the account) is a genuine grid node. W_max
follows a growth envelope capped at 50 * W0; the spacing is tuned so that W0
itself lands exactly on a node. The guarantee grid subdivides each contractual
amount G into an integer number of steps, so every balance reachable by
grid-aligned withdrawals is a node and no interpolation in A is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import ContractSpec, MarketParams


@dataclass(frozen=True)
class GridConfig:
    """Discretization sizes; defaults are the 'paper' preset."""

    num_wealth_nodes: int = 401
    nodes_per_contract_amount: int = 10
    steps_per_year: int = 100

    def __post_init__(self) -> None:
        if self.num_wealth_nodes < 51:
            raise ValidationError(
                f"num_wealth_nodes must be >= 51, got {self.num_wealth_nodes}"
            )
        if self.nodes_per_contract_amount < 1:
            raise ValidationError(
                f"nodes_per_contract_amount must be >= 1, got {self.nodes_per_contract_amount}"
            )
        if self.steps_per_year < 1:
            raise ValidationError(f"steps_per_year must be >= 1, got {self.steps_per_year}")


GRID_PRESETS = {
    "fast": GridConfig(num_wealth_nodes=201, nodes_per_contract_amount=5, steps_per_year=50),
    "paper": GridConfig(num_wealth_nodes=401, nodes_per_contract_amount=10, steps_per_year=100),
    "fine": GridConfig(num_wealth_nodes=801, nodes_per_contract_amount=20, steps_per_year=200),
}


@dataclass(frozen=True)
class WealthGrid:
    """Uniform wealth nodes 0 = w_0 < ... < w_I = W_max."""

    nodes: np.ndarray
    w0_index: int

    def __post_init__(self) -> None:
        if self.nodes[0] != 0.0:
            raise ValidationError("wealth grid must start at exactly 0")
        if not np.all(np.diff(self.nodes) > 0):
            raise ValidationError("wealth grid nodes must be strictly increasing")
        if self.num_intervals < 50:
            raise ValidationError(f"wealth grid needs >= 50 intervals, got {self.num_intervals}")
        self.nodes.setflags(write=False)

    @property
    def num_intervals(self) -> int:
        return len(self.nodes) - 1

    @property
    def w_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> float:
        return float(self.nodes[1])


@dataclass(frozen=True)
class GuaranteeGrid:
    """Guarantee levels 0 = a_0 < ... < a_J = A0, one node every G/K."""

    levels: np.ndarray
    nodes_per_contract_amount: int

    def __post_init__(self) -> None:
        if self.levels[0] != 0.0:
            raise ValidationError("guarantee grid must start at exactly 0")
        if not np.all(np.diff(self.levels) > 0):
            raise ValidationError("guarantee levels must be strictly increasing")
        self.levels.setflags(write=False)

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def spacing(self) -> float:
        return float(self.levels[1])

    def index_of(self, a_level: float) -> int:
        """Index of an exact grid level; raises for off-grid values."""
        j = int(round(a_level / self.spacing))
        if j < 0 or j >= self.num_levels or abs(self.levels[j] - a_level) > 1e-9 * max(1.0, a_level):
            raise ValidationError(f"guarantee level {a_level} is not a grid node")
        return j


@dataclass
class ValueSurface:
    """Discretized value function at one time: values[j, i] at (a_j, w_i)."""

    wealth: WealthGrid
    guarantee: GuaranteeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.guarantee.num_levels, len(self.wealth.nodes))
        if self.values.shape != expected:
            raise ValidationError(
                f"surface shape {self.values.shape} does not match grids {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("surface contains non-finite values")

    def value_at(self, w: float, a_level: float) -> float:
        """Surface value at (w, a); a must be a grid level, w may be off-grid."""
        j = self.guarantee.index_of(a_level)
        return float(interpolate_w(self.wealth, self.values[j], w))


WEALTH_DOMAIN_MULTIPLE = 8.0


def build_wealth_grid(
    spec: ContractSpec, market: MarketParams, config: GridConfig
) -> WealthGrid:
    """Uniform grid on [0, W_max] with W_max = 8 * max(W0, A0).

    Both value surfaces are exactly linear in wealth far above the guarantee
    balance (the liquidation payoff is linear there and withdrawals never
    exceed A0), and the zero-curvature boundary row reproduces linear data
    exactly, so a tight domain carries no measurable truncation error; see the
    far-field doubling test. A growth envelope like W0 * exp((r + 2 sigma) T)
    only dilutes wealth resolution where the kinks actually live. The spacing
    is snapped to W0 / m for an integer m so that W0 is itself a node, which
    moves W_max by at most half a step.
    """
    raw = WEALTH_DOMAIN_MULTIPLE * max(spec.W0, spec.A0)
    intervals = config.num_wealth_nodes - 1
    m = max(1, round(intervals * spec.W0 / raw))
    h = spec.W0 / m
    nodes = np.arange(intervals + 1, dtype=np.float64) * h
    nodes[m] = spec.W0
    return WealthGrid(nodes=nodes, w0_index=m)


def build_guarantee_grid(spec: ContractSpec, config: GridConfig) -> GuaranteeGrid:
    """Uniform levels with spacing G/K, K = nodes_per_contract_amount.

    Requires equal contractual amounts (the shipped contract); every multiple
    of G is then an exact node, including every partial sum of the G_n.
    """
    amounts = set(spec.contractual_amounts)
    if len(amounts) != 1:
        raise ValidationError("guarantee grid requires equal contractual amounts per event")
    g = spec.contractual_amounts[0]
    if g <= 0:
        raise ValidationError("contractual amount must be positive")
    k = config.nodes_per_contract_amount
    n = spec.num_events
    delta = g / k
    # Build blockwise from the exact multiples of G so partial sums are exact nodes.
    levels = np.empty(n * k + 1, dtype=np.float64)
    for block in range(n):
        base = block * g
        for s in range(k):
            levels[block * k + s] = base + s * delta
    levels[-1] = spec.A0
    return GuaranteeGrid(levels=levels, nodes_per_contract_amount=k)


def interpolate_w(grid: WealthGrid, row: np.ndarray, w) -> np.ndarray | float:
    """Piecewise-linear interpolation of a surface row along the wealth axis.

    Exact at nodes; w above W_max is clamped to the boundary value. Scalar or
    array queries are accepted.
    """
    w_arr = np.asarray(w, dtype=np.float64)
    if np.any(np.isnan(w_arr)):
        raise ValidationError("interpolation query contains NaN")
    if np.any(w_arr < 0):
        raise ValidationError("interpolation query below 0")
    out = np.interp(w_arr, grid.nodes, row)
    return float(out) if np.isscalar(w) or w_arr.ndim == 0 else out
