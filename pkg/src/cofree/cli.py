"""``cofree`` command line: gen, partition, train, verify, bench.

Exit codes: 0 success, 1 a verification assertion failed, 2 usage error.
Log level comes from ``CF_LOG`` (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from cofree import __version__, kernels
from cofree.dropedge import DEFAULT_K, DEFAULT_RATIO, masks_to_json, precompute_masks
from cofree.graph import load_dataset, save_dataset
from cofree.nn import SageModel, save_checkpoint
from cofree.partition import (
    VertexCutPartition,
    edge_cut_to_vertex_cut,
    partition_edge_cut_greedy,
    replication_stats,
    vertex_cut,
)
from cofree.reweight import SCHEMES, compute_weights
from cofree.synth import PowerLawSpec, SbmSpec, SpecError, gen_homophilic_sbm, gen_power_law
from cofree.trainer import (
    TrainConfig,
    comm_volume,
    stream_seed,
    train_cofree,
    train_full_graph,
)

logger = logging.getLogger("cofree")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dataset_files(directory):
    d = Path(directory)
    names = ("edges.txt", "features.cfm", "features.csv", "labels.txt", "masks.txt")
    return [d / n for n in names if (d / n).exists()]


def write_manifest(path, subcommand, config, inputs, seed, started):
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _now():
    return datetime.now(timezone.utc).isoformat()


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_graph(directory):
    if not (Path(directory) / "edges.txt").exists():
        raise UsageError(f"{directory}: no edges.txt")
    graph, _ = load_dataset(directory)
    return graph


def _clean_args(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and not callable(v)}


# -- gen -------------------------------------------------------------------------------

def cmd_gen(args):
    started = _now()
    out = Path(args.out)
    try:
        if args.family == "sbm":
            spec = SbmSpec(args.nodes, args.classes, args.p_in, args.p_out, args.feature_dim, args.noise, args.seed)
            graph = gen_homophilic_sbm(spec)
        else:
            spec = PowerLawSpec(args.nodes, args.exponent, args.min_degree, args.seed)
            graph = gen_power_law(spec)
    except SpecError as exc:
        raise UsageError(str(exc)) from None
    written = save_dataset(graph, out)
    write_manifest(out / "manifest.json", "gen", _clean_args(args), [], args.seed, started)
    print(json.dumps({"nodes": graph.num_nodes, "edges": graph.num_edges, "files": [str(p) for p in written]}))
    return EXIT_OK


# -- partition ------------------------------------------------------------------------------

def cmd_partition(args):
    started = _now()
    graph = _load_graph(args.graph)
    seed = stream_seed(args.seed, "partition")
    stats_extra = {"algorithm": args.algo}
    if args.algo == "edge_cut":
        ec = partition_edge_cut_greedy(graph, args.parts, seed)
        part = edge_cut_to_vertex_cut(ec, seed)
        stats_extra.update(label="greedy edge cut", halo_nodes=ec.num_halo, cut_edges=int(len(ec.cut_edges)))
    else:
        kw = {"balance_slack": args.balance_slack} if args.algo == "ne" else {}
        part = vertex_cut(graph, args.algo, args.parts, seed, **kw)
    part.validate(graph)
    stats = replication_stats(part, graph)
    weights = compute_weights(args.weights, graph, part) if args.weights else None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _dump(part.to_json(weights), out)
    summary = {"num_parts": part.num_parts, **stats.summary(), **stats_extra}
    if part.meta.get("overshoot"):
        summary["overshoot"] = part.meta["overshoot"]
    stats_path = Path(args.stats) if args.stats else out.with_suffix(".stats.json")
    _dump(summary, stats_path)
    write_manifest(out.with_suffix(".manifest.json"), "partition", _clean_args(args),
                   _dataset_files(args.graph), args.seed, started)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# -- train ------------------------------------------------------------------------------

TRAIN_FLAGS = ("layers", "hidden", "epochs", "lr", "loss", "reweight", "seed", "precision", "workers",
               "eval_every", "drop_ratio")


def _train_config(args):
    data = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    for name in TRAIN_FLAGS:
        v = getattr(args, name)
        if v is not None:
            data[name] = v
    if args.dropedge_k is not None:
        data["dropedge_k"] = args.dropedge_k
        data["use_dropedge"] = args.dropedge_k > 0
    if args.dropedge:
        data["use_dropedge"] = True
    try:
        return TrainConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad training config: {exc}") from None


def select_by_validation(history):
    """Epoch with the best validation metric (earliest on ties)."""
    scored = [m for m in history if m.val_metric is not None]
    if not scored:
        return history[-1] if history else None
    return max(scored, key=lambda m: (m.val_metric, -m.epoch))


def cmd_train(args):
    started = _now()
    config = _train_config(args)
    if args.mode == "cofree" and not args.parts_file:
        raise UsageError("--mode cofree requires --parts-file")
    graph = _load_graph(args.graph)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _dataset_files(args.graph)
    metrics_path = out / "metrics.jsonl"
    with open(metrics_path, "w") as fh:
        def emit(m):
            fh.write(m.to_json() + "\n")

        if args.mode == "full":
            model, history = train_full_graph(graph, config, callback=emit)
        else:
            inputs.append(Path(args.parts_file))
            part = VertexCutPartition.from_json(Path(args.parts_file).read_text(), graph)
            if args.dump_masks:
                dump = {str(q.index): masks_to_json(precompute_masks(
                    q.num_edges, config.dropedge_k, config.drop_ratio,
                    stream_seed(config.seed, "dropedge", q.index))) for q in part.parts}
                _dump(dump, args.dump_masks)
            model, history = train_cofree(graph, part, config, callback=emit)
    save_checkpoint(model, out / "model.cfck")
    best = select_by_validation(history)
    summary = {
        "mode": args.mode,
        "epochs": len(history),
        "final_train_loss": history[-1].train_loss if history else None,
        "final_test_metric": history[-1].test_metric if history else None,
        "selected_epoch": best.epoch if best else None,
        "selected_test_metric": best.test_metric if best else None,
        "metric": best.metric if best else None,
    }
    _dump(summary, out / "summary.json")
    write_manifest(out / "manifest.json", "train", {**_clean_args(args), "resolved": config.to_dict()},
                   inputs, config.seed, started)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# -- verify ---------------------------------------------------------------------------------

def _verify_graph(args):
    from cofree.verify import sbm_with_ratio

    if args.graph:
        return _load_graph(args.graph)
    return sbm_with_ratio(args.nodes, 4, args.homophily_ratio, 8, args.seed)


def cmd_verify(args):
    from cofree import verify

    started = _now()
    if args.check == "grad-equiv":
        graph = _verify_graph(args)
        schemes = list(SCHEMES) if args.scheme == "all" else [args.scheme.replace("-", "_")]
        runs = []
        for s in range(args.seeds):
            seed = args.seed + s
            part = vertex_cut(graph, args.algo, args.parts, stream_seed(seed, "partition"))
            model = SageModel.init(graph.features.shape[1], [args.hidden] * args.layers,
                                   graph.num_classes, np.random.default_rng(stream_seed(seed, "init")))
            runs.append({sch: verify.grad_equivalence(graph, part, model, sch).to_dict() for sch in schemes})
        medians = {sch: float(np.median([r[sch]["aggregate_error"] for r in runs])) for sch in schemes}
        exact = args.layers == 0 or args.parts == 1
        checks = {}
        if exact:
            exact_schemes = schemes if args.parts == 1 else [s for s in schemes if s == "dar"]
            for sch in exact_schemes:
                checks[f"{sch}_exact"] = medians[sch] <= 1e-12 and all(
                    r[sch]["aggregate_error"] <= 1e-12 for r in runs)
        if len(schemes) == 3 and not exact:
            checks["dar<vanilla_inv<none"] = medians["dar"] < medians["vanilla_inv"] < medians["none"]
        report = {"check": "grad-equiv", "median_error": medians, "checks": checks, "runs": runs,
                  "homophily": graph.homophily()}
    elif args.check == "rf":
        rows = []
        for p in args.p:
            rows += verify.mc_replication_check(p, args.degree, args.trials, args.seed)
        checks = {f"p={r['p']},d={r['degree']}": abs(r["z"]) <= args.z_max for r in rows}
        report = {"check": "rf", "rows": rows, "checks": checks}
    else:
        graph = _verify_graph(args)
        rows = verify.conversion_audit(graph, args.parts, list(range(args.seed, args.seed + args.seeds)))
        checks = {f"seed={r['seed']}": r["pass"] for r in rows}
        report = {"check": "theorem1", "rows": rows, "checks": checks,
                  "passed": sum(checks.values()), "total": len(checks)}
    ok = all(report["checks"].values())
    report["ok"] = ok
    text = json.dumps(report, indent=2, sort_keys=True, default=float)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
        write_manifest(Path(args.out).with_suffix(".manifest.json"), "verify", _clean_args(args),
                       _dataset_files(args.graph) if getattr(args, "graph", None) else [], args.seed, started)
    else:
        print(text)
    return EXIT_OK if ok else EXIT_FAIL


# -- bench -------------------------------------------------------------------------------------

def _time_call(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.process_time()
        fn()
        best = min(best, time.process_time() - t0)
    return best


def cmd_bench(args):
    from cofree import _pykernels
    from cofree.nn import Adjacency, loss_and_grad, sage_backward, sage_forward

    started = _now()
    graph = _load_graph(args.graph)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(stream_seed(args.seed, "init"))
    model = SageModel.init(graph.features.shape[1] if graph.features is not None else args.hidden,
                           [args.hidden] * args.layers, max(graph.num_classes, 2), rng)
    comm_rows = []
    timing_rows = []
    for p in args.parts:
        pseed = stream_seed(args.seed, "partition")
        ec = partition_edge_cut_greedy(graph, p, pseed)
        cof = comm_volume(model, p, "cofree")
        halo = comm_volume(model, p, "halo_sync_model", ec.num_halo, args.hidden)
        for rep in (cof, halo):
            comm_rows.append({"parts": p, "mode": rep.mode, "halo_nodes": ec.num_halo,
                              "floats_per_iteration": rep.floats_per_iteration,
                              "parameter_gradient_floats": rep.breakdown["parameter_gradients"],
                              "node_embedding_floats": rep.breakdown["node_embeddings"],
                              "ratio_to_cofree": rep.floats_per_iteration / cof.floats_per_iteration})
        if graph.features is not None and graph.labels is not None:
            part = vertex_cut(graph, args.algo, p, pseed)
            w = compute_weights("dar", graph, part)

            def iteration():
                for q, wq in zip(part.parts, w.values):
                    adj = Adjacency.of(q)
                    logits, cache = sage_forward(model, adj, graph.features[q.nodes])
                    _, dz = loss_and_grad(logits, graph.labels[q.nodes], wq, "softmax_ce", graph.num_nodes)
                    sage_backward(model, cache, adj, dz)

            timing_rows.append({"what": "cofree_iteration", "parts": p, "backend": kernels.BACKEND,
                                "cpu_seconds": _time_call(iteration, args.repeat)})
    x = np.random.default_rng(0).standard_normal((graph.num_nodes, args.hidden))
    impls = [("python", _pykernels)]
    if kernels.BACKEND == "cython":
        from cofree import _ckernels

        impls.append(("cython", _ckernels))
    for name, impl in impls:
        t = _time_call(lambda: kernels.neighbor_sum(graph.indptr, graph.indices, graph.edge_ids, None, x,
                                                    impl=impl), args.repeat)
        timing_rows.append({"what": "neighbor_sum", "parts": 1, "backend": name, "cpu_seconds": t})
    _write_csv(out / "comm.csv", comm_rows)
    _write_csv(out / "timing.csv", timing_rows)
    write_manifest(out / "manifest.json", "bench", _clean_args(args), _dataset_files(args.graph), args.seed,
                   started)
    print((out / "comm.csv").read_text(), end="")
    return EXIT_OK


def _write_csv(path, rows):
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


# -- parser ----------------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="cofree", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic graph")
    gsub = gen.add_subparsers(dest="family", required=True, parser_class=_Parser)
    sbm = gsub.add_parser("sbm", help="homophilic stochastic block model")
    sbm.add_argument("--nodes", type=int, default=200)
    sbm.add_argument("--classes", type=int, default=4)
    sbm.add_argument("--p-in", type=float, default=0.15)
    sbm.add_argument("--p-out", type=float, default=0.01)
    sbm.add_argument("--feature-dim", type=int, default=None)
    sbm.add_argument("--noise", type=float, default=1.0)
    pl = gsub.add_parser("powerlaw", help="Chung-Lu power-law graph")
    pl.add_argument("--nodes", type=int, default=10000)
    pl.add_argument("--exponent", type=float, default=2.5)
    pl.add_argument("--min-degree", type=int, default=2)
    for p in (sbm, pl):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        p.set_defaults(func=cmd_gen)

    part = sub.add_parser("partition", help="partition a graph's edges")
    part.add_argument("--graph", required=True)
    part.add_argument("--algo", choices=["random", "dbh", "ne", "edge_cut"], default="ne")
    part.add_argument("--parts", type=int, required=True)
    part.add_argument("--seed", type=int, default=0)
    part.add_argument("--balance-slack", type=float, default=1.1)
    part.add_argument("--weights", choices=list(SCHEMES), default=None,
                      help="embed per-replica weights of this scheme in the JSON")
    part.add_argument("--out", required=True)
    part.add_argument("--stats", default=None)
    part.set_defaults(func=cmd_partition)

    tr = sub.add_parser("train", help="full-graph or communication-free training")
    tr.add_argument("--graph", required=True)
    tr.add_argument("--mode", choices=["full", "cofree"], default="full")
    tr.add_argument("--parts-file", default=None)
    tr.add_argument("--config", default=None, help="JSON with TrainConfig fields; flags override")
    tr.add_argument("--reweight", choices=["dar", "vanilla_inv", "vanilla-inv", "none"], default=None)
    tr.add_argument("--dropedge", action="store_true", help=f"enable DropEdge-K (default K={DEFAULT_K})")
    tr.add_argument("--dropedge-k", type=int, default=None)
    tr.add_argument("--drop-ratio", type=float, default=None, help=f"default {DEFAULT_RATIO}")
    tr.add_argument("--dump-masks", default=None, help="write DropEdge masks as JSON (debug)")
    tr.add_argument("--layers", type=int, default=None)
    tr.add_argument("--hidden", type=int, default=None)
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--lr", type=float, default=None)
    tr.add_argument("--loss", choices=["softmax_ce", "bce"], default=None)
    tr.add_argument("--precision", choices=["float64", "float32"], default=None)
    tr.add_argument("--eval-every", type=int, default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--workers", type=int, default=None)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    ver = sub.add_parser("verify", help="run an independent check")
    vsub = ver.add_subparsers(dest="check", required=True, parser_class=_Parser)
    ge = vsub.add_parser("grad-equiv", help="full vs gathered partition gradient")
    ge.add_argument("--scheme", choices=["dar", "vanilla_inv", "vanilla-inv", "none", "all"], default="dar")
    ge.add_argument("--layers", type=int, default=1)
    ge.add_argument("--hidden", type=int, default=16)
    ge.add_argument("--parts", type=int, default=4)
    ge.add_argument("--algo", choices=["random", "dbh", "ne", "edge_cut"], default="ne")
    ge.add_argument("--seeds", type=int, default=1)
    rf = vsub.add_parser("rf", help="Monte Carlo replica count under random edge placement")
    rf.add_argument("--p", type=int, nargs="+", default=[2])
    rf.add_argument("--degree", type=int, nargs="+", default=[2])
    rf.add_argument("--trials", type=int, default=100_000)
    rf.add_argument("--z-max", type=float, default=4.0)
    t1 = vsub.add_parser("theorem1", help="edge cut -> vertex cut duplicate audit")
    t1.add_argument("--parts", type=int, default=4)
    t1.add_argument("--seeds", type=int, default=50)
    for p in (ge, t1):
        p.add_argument("--graph", default=None, help="dataset dir (default: generated SBM)")
        p.add_argument("--nodes", type=int, default=200)
        p.add_argument("--homophily-ratio", type=float, default=15.0)
    for p in (ge, rf, t1):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.set_defaults(func=cmd_verify)

    be = sub.add_parser("bench", help="communication volume and CPU time per iteration")
    be.add_argument("--graph", required=True)
    be.add_argument("--parts", type=int, nargs="+", default=[1, 2, 4, 8])
    be.add_argument("--algo", choices=["random", "dbh", "ne", "edge_cut"], default="ne")
    be.add_argument("--layers", type=int, default=2)
    be.add_argument("--hidden", type=int, default=64)
    be.add_argument("--repeat", type=int, default=3)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--out", required=True)
    be.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    logging.basicConfig(level=os.environ.get("CF_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cofree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"cofree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
