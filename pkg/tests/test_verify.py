import numpy as np
import pytest

from cofree.graph import Graph
from cofree.nn import SageModel
from cofree.partition import expected_rf_random, partition_random, vertex_cut
from cofree.verify import (
    audit_conversion,
    degree_rf_profile,
    grad_equivalence,
    mc_replication_check,
    sbm_with_ratio,
    conversion_audit,
)
from cofree.partition import edge_cut_from_assignment
from conftest import path_graph


def model_for(graph, layers, seed=0, hidden=8):
    return SageModel.init(graph.features.shape[1], [hidden] * layers, graph.num_classes,
                          np.random.default_rng(seed))


@pytest.mark.parametrize("scheme", ["dar", "vanilla_inv", "none"])
def test_single_part_is_exact(sbm, scheme):
    rep = grad_equivalence(sbm, vertex_cut(sbm, "random", 1), model_for(sbm, 2), scheme)
    assert rep.aggregate_error <= 1e-12


def test_zero_layers_dar_exact(sbm):
    for p in (2, 4, 8):
        rep = grad_equivalence(sbm, vertex_cut(sbm, "ne", p), model_for(sbm, 0), "dar")
        assert rep.aggregate_error <= 1e-12
        assert rep.extra["loss_gap"] <= 1e-12


def test_zero_layers_none_not_exact(sbm):
    rep = grad_equivalence(sbm, vertex_cut(sbm, "random", 4), model_for(sbm, 0), "none")
    assert rep.aggregate_error > 0.1


def test_sbm_with_ratio_hits_ratio():
    g = sbm_with_ratio(400, 4, 15.0, 8, seed=0)
    assert 6 < 2 * g.num_edges / g.num_nodes < 10
    assert g.homophily() > 0.7


def test_mc_degree_one_exact():
    row = mc_replication_check(4, [1], trials=1000, seed=0)[0]
    assert row["mean_rf"] == 1.0 and row["z"] == 0.0


def test_mc_p2_d2():
    row = mc_replication_check(2, [2], trials=100_000, seed=0)[0]
    assert abs(row["z"]) <= 4


def test_mc_p8_d50():
    row = mc_replication_check(8, [50], trials=100_000, seed=1)[0]
    assert row["rel_error"] <= 0.005
    assert row["expected_rf"] == pytest.approx(8 * (1 - (7 / 8) ** 50))


def test_degree_profile_increasing(power_law_small):
    prof = degree_rf_profile(power_law_small, 8, range(3), partition_random)
    assert prof[1] == 1.0
    big = max(d for d in prof if d <= 60)
    assert prof[big] > prof[2]
    assert prof[20] == pytest.approx(expected_rf_random(8, 20), rel=0.1)


def test_audit_examples():
    g = path_graph(4)
    assert audit_conversion(g, edge_cut_from_assignment(g, [0, 0, 1, 1], 2), 0)["pass"]
    h, _ = Graph.from_edges(4, [(0, 1), (2, 3)])
    row = audit_conversion(h, edge_cut_from_assignment(h, [0, 0, 1, 1], 2), 0)
    assert row["halo_nodes"] == 0 and row["duplicated_nodes"] == 0 and row["pass"]


def test_conversion_audit_50_seeds(sbm):
    rows = conversion_audit(sbm, 4, range(50))
    assert all(r["pass"] for r in rows)
    with pytest.raises(ValueError):
        conversion_audit(sbm, 1, [0])


def test_mc_degree_one_any_p():
    # closed form is 1 only up to rounding for some p
    for p in (2, 3, 7, 8):
        assert mc_replication_check(p, [1], trials=100, seed=0)[0]["z"] == 0.0


def test_rf_variance_matches_simulation():
    from cofree.verify import rf_variance_random

    rng = np.random.default_rng(3)
    draws = rng.integers(0, 4, size=(200_000, 3))
    rf = np.array([len(set(r)) for r in draws.tolist()])
    assert rf_variance_random(4, 3) == pytest.approx(rf.var(), rel=0.02)
    assert rf_variance_random(5, 1) == 0.0
