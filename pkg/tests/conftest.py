import numpy as np
import pytest

from ringsnn.network import LIF, POISSON, Network, Population
from ringsnn.neuron import LifParams


def chain_network(i_dc=500.0, weight=1e5, delay=1):
    """Neuron 0 on core 0 driven by DC, projecting to neuron 1 on core 1."""
    rest = (-65.0, -65.0 + 1e-12)
    pops = [
        Population("a", 0, 1, LIF, LifParams(i_dc=i_dc), v_init=rest),
        Population("b", 1, 1, LIF, LifParams(), v_init=rest),
    ]
    return Network(pops, [0], [1], [weight], [delay], core_capacity=1, n_cores=2)


def silent_network(n=64, n_cores=4):
    cap = -(-n // n_cores)
    return Network([Population("lif", 0, n, LIF, LifParams(), v_init=(-70.0, -66.0))],
                   [], [], [], [], core_capacity=cap, n_cores=n_cores)


@pytest.fixture
def chain():
    return chain_network()


@pytest.fixture
def poisson_pair():
    pops = [Population("p", 0, 2, POISSON, rate_hz=200.0)]
    return Network(pops, [], [], [], [], core_capacity=2, n_cores=1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
