import random
import sys

import pytest

from certmesh.identity import OracleScheme, generate_keypair
from certmesh.protocol import Node, ProtocolParams
from certmesh.sim import MobilityState, Network, RadioModel, Simulator


class Bench:
    """A handful of nodes at fixed positions sharing one simulator."""

    def __init__(self, points, params=None, radio=None, node_cls=Node, trace=None, **node_kwargs):
        self.scheme = OracleScheme()
        self.sim = Simulator(trace=trace)
        self.mobility = MobilityState.static(points, area=(5000.0, 5000.0))
        self.net = Network(self.sim, self.mobility, radio or RadioModel())
        self.params = params or ProtocolParams()
        self.nodes = {}
        for i in range(len(points)):
            keys = generate_keypair(i, random.Random(f"bench/{i}"), self.scheme)
            self.nodes[i] = node_cls(i, keys, self.net, params=self.params, scheme=self.scheme, **node_kwargs)
        self.net.nodes = self.nodes

    def __getitem__(self, i):
        return self.nodes[i]

    def run(self, until=10.0):
        self.sim.run(until)


def line(n, spacing=200.0):
    return [(100.0 + spacing * i, 100.0) for i in range(n)]


@pytest.fixture
def bench():
    return Bench


@pytest.fixture
def keys():
    scheme = OracleScheme()
    rng = random.Random(42)
    return scheme, [generate_keypair(i, rng, scheme) for i in range(6)]


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
