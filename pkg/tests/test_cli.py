import json

import pytest

from cofree.cli import main


def run(argv, capsys=None):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    return code


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "g"
    assert run(["gen", "sbm", "--nodes", 200, "--classes", 4, "--seed", 7, "--out", d]) == 0
    return d


def test_gen_files_and_repeat(data_dir, tmp_path):
    names = sorted(p.name for p in data_dir.iterdir())
    assert names == ["edges.txt", "features.cfm", "labels.txt", "manifest.json", "masks.txt"]
    again = tmp_path / "g2"
    assert run(["gen", "sbm", "--nodes", 200, "--classes", 4, "--seed", 7, "--out", again]) == 0
    for n in ("edges.txt", "features.cfm", "labels.txt", "masks.txt"):
        assert (again / n).read_bytes() == (data_dir / n).read_bytes()


def test_gen_usage_errors(tmp_path):
    assert run(["gen", "sbm", "--classes", 0, "--out", tmp_path]) == 2
    assert run(["gen", "nope", "--out", tmp_path]) == 2


def test_partition(data_dir, tmp_path, capsys):
    assert run(["partition", "--graph", data_dir, "--algo", "ne", "--parts", 4, "--out", tmp_path / "ne.json"]) == 0
    stats = json.loads((tmp_path / "ne.stats.json").read_text())
    assert stats["rf"] >= 1
    assert run(["partition", "--graph", data_dir, "--parts", 1, "--out", tmp_path / "one.json"]) == 0
    assert json.loads((tmp_path / "one.stats.json").read_text())["rf"] == 1.0
    a = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert run(["partition", "--graph", data_dir, "--algo", "random", "--seed", 3, "--parts", 4,
                    "--out", out]) == 0
        a.append(json.loads(out.read_text())["edge_assignment"])
    assert a[0] == a[1]
    assert run(["partition", "--graph", data_dir, "--algo", "metis", "--parts", 2, "--out", tmp_path / "x"]) == 2
    assert run(["partition", "--graph", data_dir, "--algo", "edge_cut", "--parts", 4,
                "--out", tmp_path / "ec.json"]) == 0
    assert json.loads((tmp_path / "ec.stats.json").read_text())["halo_nodes"] > 0


def test_train_full_monotone_epochs(data_dir, tmp_path):
    out = tmp_path / "full"
    assert run(["train", "--graph", data_dir, "--mode", "full", "--epochs", 5, "--hidden", 8, "--out", out]) == 0
    epochs = [json.loads(l)["epoch"] for l in (out / "metrics.jsonl").read_text().splitlines()]
    assert epochs == [0, 1, 2, 3, 4]
    assert (out / "model.cfck").exists()


def test_train_cofree_defaults(data_dir, tmp_path):
    parts = tmp_path / "p.json"
    run(["partition", "--graph", data_dir, "--parts", 4, "--out", parts])
    out = tmp_path / "cf"
    assert run(["train", "--graph", data_dir, "--mode", "cofree", "--parts-file", parts, "--reweight", "dar",
                "--dropedge-k", 10, "--drop-ratio", 0.5, "--epochs", 3, "--hidden", 8,
                "--dump-masks", tmp_path / "m.json", "--out", out]) == 0
    resolved = json.loads((out / "manifest.json").read_text())["config"]["resolved"]
    assert resolved["use_dropedge"] and resolved["dropedge_k"] == 10 and resolved["drop_ratio"] == 0.5
    masks = json.loads((tmp_path / "m.json").read_text())
    assert all(m["K"] == 10 for m in masks.values())


def test_train_usage_errors(data_dir, tmp_path):
    assert run(["train", "--graph", data_dir, "--mode", "cofree", "--out", tmp_path]) == 2
    assert run(["train", "--graph", data_dir, "--reweight", "bogus", "--out", tmp_path]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text('{"unknown_key": 1}')
    assert run(["train", "--graph", data_dir, "--config", cfg, "--out", tmp_path / "o"]) == 2


def test_verify_commands(tmp_path):
    assert run(["verify", "grad-equiv", "--layers", 0, "--scheme", "dar", "--out", tmp_path / "g.json"]) == 0
    rep = json.loads((tmp_path / "g.json").read_text())
    assert rep["median_error"]["dar"] <= 1e-12
    assert run(["verify", "rf", "--p", 2, "--degree", 2, "--trials", 100000, "--out", tmp_path / "rf.json"]) == 0
    assert abs(json.loads((tmp_path / "rf.json").read_text())["rows"][0]["z"]) <= 4
    assert run(["verify", "theorem1", "--seeds", 50, "--out", tmp_path / "t.json"]) == 0
    assert json.loads((tmp_path / "t.json").read_text())["passed"] == 50


def test_verify_failure_exit_code(tmp_path):
    # an impossible z bound makes the assertion fail
    assert run(["verify", "rf", "--p", 4, "--degree", 5, "--trials", 1000, "--z-max", -1,
                "--out", tmp_path / "f.json"]) == 1


def test_bench(data_dir, tmp_path):
    out = tmp_path / "b"
    assert run(["bench", "--graph", data_dir, "--parts", 1, 8, "--repeat", 1, "--out", out]) == 0
    rows = [l.split(",") for l in (out / "comm.csv").read_text().splitlines()]
    head, body = rows[0], rows[1:]
    fl = head.index("floats_per_iteration")
    by = {(r[0], r[1]): int(r[fl]) for r in body}
    assert by[("1", "cofree")] == by[("1", "halo_sync_model")]
    assert by[("8", "halo_sync_model")] > by[("8", "cofree")]
    assert (out / "timing.csv").exists()
