import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from netlength.network import RoadNetwork  # noqa: E402
from netlength.synth import grid_network, hybrid_network, radial_network  # noqa: E402


def line_network(length=1.0):
    return RoadNetwork({"a": (0.0, 0.0), "b": (length, 0.0)}, [("e0", "a", "b", length)])


def square_network():
    nodes = {"0": (0, 0), "1": (1, 0), "2": (1, 1), "3": (0, 1)}
    edges = [("0", "0", "1", None), ("1", "1", "2", None), ("2", "2", "3", None), ("3", "3", "0", None)]
    return RoadNetwork(nodes, edges)


def multigraph_network():
    # two parallel routes between a and b plus a dead-end tail
    nodes = {"a": (0, 0), "b": (1, 0), "c": (2, 0)}
    edges = [("p", "a", "b", 1.0), ("q", "a", "b", 1.5), ("t", "b", "c", 1.0)]
    return RoadNetwork(nodes, edges)


def disconnected_network():
    nodes = {"a": (0, 0), "b": (1, 0), "c": (0, 5), "d": (2, 5)}
    return RoadNetwork(nodes, [("e0", "a", "b", None), ("e1", "c", "d", None)])


@pytest.fixture(scope="session")
def small_networks():
    return {
        "line": line_network(),
        "square": square_network(),
        "multigraph": multigraph_network(),
        "grid3": grid_network(3, 3),
        "star6": radial_network(6, 2.0),
        "radial_rings": radial_network(6, 2.0, rings=2),
        "disconnected": disconnected_network(),
    }


@pytest.fixture(scope="session")
def hybrid():
    return hybrid_network()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
