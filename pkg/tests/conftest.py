import math

import pytest

from gasjitter.network import Compressor, GasProperties, Network, Node, Pipe
from gasjitter.synthetic import (
    REFERENCE_GAS,
    branched_tree,
    compressor_cascade,
    path_network,
    single_pipe,
    star_network,
)

TWO_NODE_DOC = """\
[gas]
sound_speed = 366 m/s
friction = 0.01

[network]
slack = A
slack_pressure = 800 psi

[nodes]
A q=10 p_min=500psi p_max=800psi
B q=-10 p_min=500psi p_max=800psi

[pipes]
P1 A B length=100km diameter=0.9144m
"""

P0 = 5.5e6


def boost_pipe(p_min=4.8e6, alpha_max=1.2, p_max=math.inf):
    return single_pipe(p_min=p_min, p_max=p_max, compressor=(1.0, alpha_max))


def twin_branches():
    """Slack in the middle feeding two identical loaded branches."""
    nodes = [Node("M", 300.0, 0.0, 8e6), Node("L", -150.0, 4.8e6, 8e6),
             Node("R", -150.0, 4.8e6, 8e6)]
    pipes = [Pipe("PL", "M", "L", 100e3, 0.9144), Pipe("PR", "M", "R", 100e3, 0.9144)]
    comps = [Compressor("cL", "PL", "M", 1.0, 1.3), Compressor("cR", "PR", "M", 1.0, 1.3)]
    return Network(REFERENCE_GAS, nodes, pipes, comps, slack="M", slack_pressure=P0, name="twin")


def decompression_instance():
    """Slack A and supply C both feed load B; C's station pushes toward B.

    The relaxed program lets C sit at its floor while B stays low, which
    needs decompression at C; forbidding that forces a boost at A.
    """
    gas = GasProperties(366.0, 0.01)
    nodes = [Node("A", 100.0, 0.0, 8e6), Node("B", -200.0, 4.5e6, 8e6),
             Node("C", 100.0, 5.6e6, 8e6)]
    pipes = [Pipe("P1", "A", "B", 100e3, 0.9144), Pipe("P2", "C", "B", 100e3, 0.9144)]
    comps = [Compressor("c1", "P1", "A", 1.0, 1.4), Compressor("c2", "P2", "C", 1.0, 1.4)]
    return Network(gas, nodes, pipes, comps, slack="A", slack_pressure=5.5e6, name="decompression")


def alternating_cascade():
    """Three 60 km pipes where only the middle station has to run."""
    return compressor_cascade(n=3, length=60e3, alpha_max=1.2)


def two_supply_path(n=9, length=60e3, supply=(60.0, 40.0), load=100.0):
    """Supplies at both ends, one central load, noisy consumers everywhere."""
    loads = [0.0] * (n - 2)
    centre = (n - 2) // 2
    loads[centre] = load
    nodes = []
    for i in range(n):
        if i == 0:
            q = supply[0]
        elif i == n - 1:
            q = supply[1]
        else:
            q = -loads[i - 1]
        nodes.append(Node(f"N{i}", q, 0.0, math.inf, 2.0 if 0 < i < n - 1 else 0.0))
    pipes = [Pipe(f"P{i + 1}", f"N{i}", f"N{i + 1}", length, 0.9144) for i in range(n - 1)]
    return Network(REFERENCE_GAS, nodes, pipes, slack="N0", slack_pressure=5.5e6,
                   mainline=("N0", f"N{n - 1}"), name="two_supply")


STEADY_NETWORKS = {
    "single_pipe": lambda: (single_pipe(), {}),
    "path3": lambda: (path_network([20.0, 30.0, 40.0], [40e3, 70e3, 55e3]), {}),
    "star5": lambda: (star_network(5), {}),
    "branched": lambda: (branched_tree(), {}),
    "cascade": lambda: (compressor_cascade(n=3, length=80e3), {"C0": 1.1, "C1": 1.25, "C2": 1.05}),
}


@pytest.fixture
def pipe100():
    return single_pipe()


@pytest.fixture
def decompression_net():
    return decompression_instance()


# acceptance report --------------------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.stash[_ACCEPTANCE].append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
