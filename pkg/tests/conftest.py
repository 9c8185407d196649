from pathlib import Path

import numpy as np
import pytest

from cofree.graph import Graph, load_graph
from cofree.synth import PowerLawSpec, SbmSpec, gen_homophilic_sbm, gen_power_law

DATA = Path(__file__).parent / "data"

# fixture settings shared with the acceptance suite
SBM_SMALL = SbmSpec(num_nodes=200, num_classes=4, p_in=0.15, p_out=0.01, seed=7)
SBM_LARGE = dict(num_nodes=1000, num_classes=4, p_in=0.04, p_out=0.04 / 15, feature_dim=8, feature_noise=1.5)


@pytest.fixture(scope="session")
def karate():
    g, _ = load_graph(DATA / "karate.txt")
    return g


@pytest.fixture(scope="session")
def sbm():
    return gen_homophilic_sbm(SBM_SMALL)


@pytest.fixture(scope="session")
def power_law():
    return gen_power_law(PowerLawSpec(num_nodes=10000, exponent=2.5, min_degree=2, seed=1))


@pytest.fixture(scope="session")
def power_law_small():
    return gen_power_law(PowerLawSpec(num_nodes=2000, exponent=2.5, min_degree=2, seed=5))


def path_graph(n):
    g, _ = Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    return g


def star_graph(leaves):
    g, _ = Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])
    return g


def random_graph(n, m, seed):
    rng = np.random.default_rng(seed)
    g, _ = Graph.from_edges(n, rng.integers(0, n, size=(m, 2)))
    return g


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []))
            if rep.when == "call" and "criterion" in props:
                rows.append((props["criterion"], outcome, props.get("detail", "")))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for num, outcome, detail in sorted(rows):
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if outcome == 'passed' else 'FAIL'}  {detail}")
