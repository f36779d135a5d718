import os

import pytest

from tndp.assignment import AssignmentSettings
from tndp.formats import bundled_path, load_network, load_projects
from tndp.network import Arc, Network, ODPair
from tndp.oracle import enumerate_decisions

HERE = os.path.dirname(os.path.abspath(__file__))
SIX_NODE = os.path.join(HERE, "data", "six_node")
SF_BUDGET = 5000.0
SIX_BUDGET = 6.0

# Lines collected by the acceptance module and echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def six_paths():
    return tuple(os.path.join(SIX_NODE, f) for f in ("network.txt", "trips.txt", "projects.txt"))


def sf_paths():
    return tuple(bundled_path(f) for f in ("network.txt", "trips.txt", "projects.txt"))


def parallel_network(alphas, betas, demand):
    """Two nodes joined by len(alphas) parallel arcs, one OD pair 1 -> 2."""
    arcs = [Arc(k + 1, 1, 2, float(a), float(b)) for k, (a, b) in enumerate(zip(alphas, betas))]
    return Network.from_arcs(arcs, [ODPair(1, 2, float(demand))])


@pytest.fixture(scope="session")
def sf_net():
    net_path, trips_path, _ = sf_paths()
    return load_network(net_path, trips_path)


@pytest.fixture(scope="session")
def sf_ps(sf_net):
    return load_projects(sf_paths()[2], SF_BUDGET, sf_net)


@pytest.fixture(scope="session")
def six_net():
    net_path, trips_path, _ = six_paths()
    return load_network(net_path, trips_path)


@pytest.fixture(scope="session")
def six_ps(six_net):
    return load_projects(six_paths()[2], SIX_BUDGET, six_net)


@pytest.fixture(scope="session")
def six_table(six_net, six_ps):
    return enumerate_decisions(six_net, six_ps, AssignmentSettings())


@pytest.fixture(scope="session")
def sf_table(sf_net, sf_ps):
    """Full Sioux Falls enumeration at the fixture budget (about half a minute)."""
    return enumerate_decisions(sf_net, sf_ps, AssignmentSettings())
