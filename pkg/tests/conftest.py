import pytest

from gmwb.grids import GridConfig
from gmwb.model import MarketParams, build_contract


@pytest.fixture(scope="session")
def tiny_grid():
    """Cheapest legal grid; for plumbing tests, not accuracy."""
    return GridConfig(num_wealth_nodes=81, nodes_per_contract_amount=2, steps_per_year=12)


@pytest.fixture(scope="session")
def fast_grid():
    return GridConfig(num_wealth_nodes=201, nodes_per_contract_amount=5, steps_per_year=50)


@pytest.fixture(scope="session")
def paper_grid():
    return GridConfig()


@pytest.fixture
def contract_5y():
    return build_contract(T=5, events_per_year=1, beta=0.10)


@pytest.fixture
def market_low():
    return MarketParams(r=0.01, sigma=0.10)
