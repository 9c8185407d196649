import numpy as np
import pytest

from cofree.synth import PowerLawSpec, SbmSpec, SpecError, gen_homophilic_sbm, gen_power_law
from conftest import SBM_SMALL


def test_degenerate_sbm_two_cliques():
    g = gen_homophilic_sbm(SbmSpec(4, 2, p_in=1.0, p_out=0.0, feature_noise=0.0, seed=3))
    assert g.num_edges == 2
    for u, v in g.edges:
        assert g.labels[u] == g.labels[v]
    np.testing.assert_array_equal(g.features, np.eye(2)[g.labels])


def test_sbm_homophily(sbm):
    y = sbm.labels
    intra = sum(1 for u, v in sbm.edges.tolist() if y[u] == y[v])
    assert intra / sbm.num_edges > 0.7


def test_sbm_deterministic():
    a = gen_homophilic_sbm(SBM_SMALL)
    b = gen_homophilic_sbm(SBM_SMALL)
    assert a.edges.tobytes() == b.edges.tobytes()
    assert a.features.tobytes() == b.features.tobytes()


def test_sbm_split_and_no_isolated(sbm):
    counts = [int(sbm.masks[s].sum()) for s in ("train", "val", "test")]
    assert counts == [120, 40, 40]
    assert sbm.degrees.min() >= 1
    sparse = gen_homophilic_sbm(SbmSpec(50, 5, 0.02, 0.0, seed=1))
    assert sparse.degrees.min() >= 1


def test_sbm_homophily_monotone():
    means = []
    for ratio in (2, 5, 15):
        vals = [gen_homophilic_sbm(SbmSpec(200, 4, 0.06, 0.06 / ratio, seed=s)).homophily() for s in range(3)]
        means.append(np.mean(vals))
    assert means[0] < means[1] < means[2]


def test_sbm_spec_errors():
    with pytest.raises(SpecError):
        gen_homophilic_sbm(SbmSpec(3, 4, 0.5, 0.1))
    with pytest.raises(SpecError):
        gen_homophilic_sbm(SbmSpec(10, 2, 1.5, 0.1))


def test_power_law_tail(power_law):
    d = power_law.degrees.astype(float)
    xmin = 4  # 2 * min_degree; below it Poisson noise distorts the head
    tail = d[d >= xmin]
    alpha = 1 + len(tail) / np.sum(np.log(tail / (xmin - 0.5)))
    assert 2.0 <= alpha <= 3.0
    assert abs(alpha - 2.5) <= 0.5
    assert power_law.degrees.max() / power_law.degrees.min() >= 10
    assert power_law.degrees.min() >= 1


def test_power_law_small_and_deterministic():
    g = gen_power_law(PowerLawSpec(10, 2.5, 2, seed=4))
    assert int(g.degrees.sum()) == 2 * g.num_edges
    assert g.degrees.min() >= 1
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    h = gen_power_law(PowerLawSpec(10, 2.5, 2, seed=4))
    assert g.edges.tobytes() == h.edges.tobytes()


def test_power_law_infeasible():
    with pytest.raises(SpecError):
        gen_power_law(PowerLawSpec(3, 2.5, 5))
    with pytest.raises(SpecError):
        gen_power_law(PowerLawSpec(100, 0.9, 2))
