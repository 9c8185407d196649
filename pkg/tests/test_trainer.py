import numpy as np
import pytest

from cofree.nn import ParamGrads, SageModel
from cofree.partition import edge_cut_to_vertex_cut, partition_edge_cut_greedy, vertex_cut
from cofree.trainer import (
    CommunicationViolation,
    GradientChannel,
    TrainConfig,
    comm_volume,
    evaluate,
    gather_gradients,
    init_model,
    metric_from_logits,
    stream_rng,
    train_cofree,
    train_full_graph,
)
from oracles import tree_sum

FAST = dict(epochs=30, hidden=16)


def test_oracle_reaches_train_accuracy(sbm):
    _, hist = train_full_graph(sbm, TrainConfig(layers=2, epochs=200, lr=0.01, seed=0))
    assert hist[-1].train_metric >= 0.95


def test_zero_epochs_returns_init(sbm):
    cfg = TrainConfig(epochs=0)
    model, hist = train_full_graph(sbm, cfg)
    assert hist == []
    ref = init_model(sbm, cfg)
    for a, b in zip(model.params(), ref.params()):
        np.testing.assert_array_equal(a, b)


def test_full_graph_deterministic(sbm):
    a, _ = train_full_graph(sbm, TrainConfig(**FAST))
    b, _ = train_full_graph(sbm, TrainConfig(**FAST))
    for x, y in zip(a.params(), b.params()):
        assert x.tobytes() == y.tobytes()


def test_p1_matches_full_graph(sbm):
    cfg = TrainConfig(**FAST)
    _, full = train_full_graph(sbm, cfg)
    _, cf = train_cofree(sbm, vertex_cut(sbm, "random", 1), cfg)
    assert max(abs(a.train_loss - b.train_loss) for a, b in zip(full, cf)) <= 1e-10


def test_threaded_matches_serial(sbm):
    part = vertex_cut(sbm, "ne", 4)
    a, ha = train_cofree(sbm, part, TrainConfig(**FAST, use_dropedge=True))
    b, hb = train_cofree(sbm, part, TrainConfig(**FAST, use_dropedge=True, workers=4))
    assert [m.train_loss for m in ha] == [m.train_loss for m in hb]
    for x, y in zip(a.params(), b.params()):
        assert x.tobytes() == y.tobytes()


def test_float32_runs(sbm):
    model, hist = train_cofree(sbm, vertex_cut(sbm, "dbh", 2), TrainConfig(**FAST, precision="float32"))
    assert model.head.dtype == np.float32
    assert np.isfinite(hist[-1].train_loss)


def test_gather_examples():
    g = ParamGrads([np.arange(6.0).reshape(2, 3)])
    assert gather_gradients([g]).arrays[0].tolist() == g.arrays[0].tolist()
    neg = ParamGrads([-g.arrays[0]])
    assert not gather_gradients([g, neg]).arrays[0].any()
    rng = np.random.default_rng(0)
    parts = [ParamGrads([rng.standard_normal((4, 5)), rng.standard_normal(3)]) for _ in range(4)]
    got = gather_gradients(parts)
    for k in range(2):
        np.testing.assert_allclose(got.arrays[k], tree_sum([p.arrays[k] for p in parts]), rtol=0, atol=1e-12)


def test_channel_rejects_embeddings():
    ch = GradientChannel(2)
    with pytest.raises(CommunicationViolation):
        ch.send(0, np.zeros((3, 4)))
    ch.send(0, ParamGrads([np.zeros(3)]))
    with pytest.raises(CommunicationViolation):
        ch.send(0, ParamGrads([np.zeros(3)]))
    with pytest.raises(CommunicationViolation):
        ch.collect()


def test_comm_volume_formulas(sbm):
    model = SageModel.init(4, [64, 64], 4, np.random.default_rng(0))
    assert comm_volume(model, 1).floats_per_iteration == model.num_params
    assert comm_volume(model, 8, "halo_sync_model", 0).floats_per_iteration == 8 * model.num_params
    ec = partition_edge_cut_greedy(sbm, 8, 0)
    halo = comm_volume(model, 8, "halo_sync_model", ec.num_halo, 64)
    assert halo.floats_per_iteration - 8 * model.num_params == 2 * 2 * ec.num_halo * 64
    assert ec.num_halo > 0


def test_comm_audit_in_training(sbm):
    part = edge_cut_to_vertex_cut(partition_edge_cut_greedy(sbm, 4, 0), 0)
    model, hist = train_cofree(sbm, part, TrainConfig(epochs=5, hidden=8))
    assert {m.comm_floats_this_iter for m in hist} == {4 * model.num_params}


def test_metric_examples():
    y = np.arange(10) % 3
    z = np.eye(3)[y]
    assert metric_from_logits(z, y, np.ones(10, bool)) == 1.0
    yb = np.array([0, 1] * 5)
    assert metric_from_logits(np.tile([1.0, 0.0], (10, 1)), yb, np.ones(10, bool)) == 0.5
    ml = np.array([[1, 0], [0, 0]])
    assert metric_from_logits(np.full((2, 2), -1.0), ml, np.ones(2, bool)) == 0.0
    with pytest.raises(ValueError):
        metric_from_logits(z, y, np.zeros(10, bool))


def test_evaluate_split(sbm):
    model, hist = train_full_graph(sbm, TrainConfig(**FAST))
    assert evaluate(model, sbm, "test") == hist[-1].test_metric
    with pytest.raises(ValueError):
        evaluate(model, sbm, "holdout")


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"epochs": 3, "batch": 4})
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    assert TrainConfig(reweight="vanilla-inv").reweight == "vanilla_inv"


def test_streams_independent():
    a = stream_rng(1, "init").random(3)
    b = stream_rng(1, "dropedge").random(3)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, stream_rng(1, "init").random(3))


def test_partition_mismatch(sbm, karate):
    with pytest.raises(ValueError):
        train_cofree(sbm, vertex_cut(karate, "random", 2), TrainConfig(epochs=1))
