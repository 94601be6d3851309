"""Exception types shared across the pricing engine."""


class ValidationError(ValueError):
    """Raised when a contract, market, fee, or grid parameter is invalid."""


class ConfigurationError(Exception):
    """Raised when an experiment or simulation configuration is unusable."""


class NoRootError(RuntimeError):
    """Fair-fee bracketing failed: no sign change over the expanded bracket.

    Carries the liabilities observed at both endpoints so the caller can
    report how far from a root the search ended.
    """

    def __init__(self, low: float, high: float, f_low: float, f_high: float):
        self.low = low
        self.high = high
        self.f_low = f_low
        self.f_high = f_high
        super().__init__(
            f"no sign change in net liability over [{low:.4f}, {high:.4f}]: "
            f"L0({low:.4f})={f_low:.6e}, L0({high:.4f})={f_high:.6e}"
        )


class NumericalInstabilityError(RuntimeError):
    """A PDE step produced a non-finite value at grid node (a_index, w_index)."""

    def __init__(self, a_index: int, w_index: int, time_step: int | None = None):
        self.a_index = a_index
        self.w_index = w_index
        self.time_step = time_step
        where = f"guarantee row {a_index}, wealth node {w_index}"
        if time_step is not None:
            where += f", sub-step {time_step}"
        super().__init__(f"non-finite value after PDE step at {where}")
