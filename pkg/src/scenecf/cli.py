"""Command line entry point: ``scenecf <subcommand> ...``.

Subcommands: ged, matrix, gram, embed, rank, eval, explain, split, pipeline.
Numeric defaults live in :data:`DEFAULTS`. The only environment override is
``SCENECF_WORKERS`` for the worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .embedding import load_embeddings, wl_feature_embedding
from .errors import ConsistencyError, EligibilityError, ScenecfError
from .evaluation import evaluate, write_report_csv
from .ged import DEFAULT_NODE_BUDGET, PairwiseMatrix, apply_edit_path, ged, pairwise_ged_matrix
from .graph import DENSE_DEFAULTS, load_dataset, save_dataset, split_dense, split_random
from .kernels import KINDS, GramMatrix, KernelConfig, gram
from .retrieval import GroundTruth, RankTable, backend_ranks, candidates, counterfactual, ground_truth_ranks
from .taxonomy import CostModel, load_taxonomy

log = logging.getLogger("scenecf")

DEFAULTS = {
    "method": "approx",
    "node_budget": DEFAULT_NODE_BUDGET,
    "ks": "1,2,4",
    "kernel": "WL",
    "wl_iterations": 3,
    "nh_iterations": 2,
    "nh_bits": 32,
    "rw_lambda": None,
    "gs_graphlet_size": 4,
    "gs_samples": 500,
    "gs_seed": 0,
    "embed_dim": 4096,
    "embed_seed": 0,
    "split_n": 500,
    "split_seed": 0,
    "binary_precision": "hit_rate",
    "precision": 4,
    **DENSE_DEFAULTS,
}


# ---------------------------------------------------------------- argument groups


def _add_data(p, taxonomy=True):
    p.add_argument("--graphs", required=True, help="scene-graph JSON file")
    p.add_argument("--labels", required=True, help="graph_id,label CSV file")
    if taxonomy:
        p.add_argument("--taxonomy", required=True, help="child<TAB>parent TSV file")
        p.add_argument("--root", default=None, help="taxonomy root (inferred when omitted)")
        p.add_argument("--raw-hop-del-cost", action="store_true",
                       help="delete/insert cost = hop count to the root instead of 1 - similarity")


def _add_ged(p):
    p.add_argument("--method", choices=("exact", "approx"), default=DEFAULTS["method"])
    p.add_argument("--node-budget", type=int, default=DEFAULTS["node_budget"])


def _add_workers(p):
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: SCENECF_WORKERS or all cores)")


def _add_kernel(p, multiple=False):
    if multiple:
        p.add_argument("--kernels", default="WL,SP,NH,RW,GS", help="comma list of kernels, or 'none'")
    else:
        p.add_argument("--kernel", choices=KINDS, type=str.upper, default=DEFAULTS["kernel"])
    p.add_argument("--wl-iterations", type=int, default=DEFAULTS["wl_iterations"])
    p.add_argument("--nh-iterations", type=int, default=DEFAULTS["nh_iterations"])
    p.add_argument("--nh-bits", type=int, default=DEFAULTS["nh_bits"])
    p.add_argument("--rw-lambda", type=float, default=DEFAULTS["rw_lambda"])
    p.add_argument("--gs-graphlet-size", type=int, default=DEFAULTS["gs_graphlet_size"])
    p.add_argument("--gs-samples", type=int, default=DEFAULTS["gs_samples"])
    p.add_argument("--gs-seed", type=int, default=DEFAULTS["gs_seed"])


def _kernel_config(args, kind=None) -> KernelConfig:
    return KernelConfig(
        kind=kind or args.kernel,
        wl_iterations=args.wl_iterations,
        nh_iterations=args.nh_iterations,
        nh_bits=args.nh_bits,
        rw_lambda=args.rw_lambda,
        gs_graphlet_size=args.gs_graphlet_size,
        gs_samples=args.gs_samples,
        gs_seed=args.gs_seed,
    )


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be positive integers")
    return ks


def _load(args, min_classes=2):
    ds = load_dataset(args.graphs, args.labels, require_classes=min_classes)
    if not hasattr(args, "taxonomy"):
        return ds, None
    tax = load_taxonomy(args.taxonomy, args.root)
    return ds, CostModel(tax, args.raw_hop_del_cost)


# ---------------------------------------------------------------- subcommands


def cmd_ged(args) -> int:
    ds, cm = _load(args, min_classes=1)
    g1, g2 = ds.graph(args.a), ds.graph(args.b)
    cost, path = ged(g1, g2, cm, args.method, args.node_budget)
    print(round(cost, args.precision))
    if args.path:
        print(path.to_json(indent=1))
    return 0


def cmd_matrix(args) -> int:
    ds, cm = _load(args, min_classes=1)
    m = pairwise_ged_matrix(ds, cm, args.method, args.workers, args.directional, args.node_budget)
    m.save(args.out)
    log.info("wrote %dx%d %s matrix to %s", len(ds), len(ds), args.method, args.out)
    return 0


def cmd_gram(args) -> int:
    ds, _ = _load(args, min_classes=1)
    gm = gram(ds, _kernel_config(args), normalize=not args.no_normalize)
    gm.save(args.out)
    log.info("wrote %s Gram matrix to %s", gm.config.kind, args.out)
    return 0


def cmd_embed(args) -> int:
    ds, _ = _load(args, min_classes=1)
    cfg = KernelConfig("WL", wl_iterations=args.wl_iterations)
    wl_feature_embedding(ds, cfg, args.dim, args.seed).save(args.out)
    return 0


def _backend_from_args(args):
    chosen = [x for x in (args.matrix, args.gram, args.embeddings) if x]
    if len(chosen) != 1:
        raise ConsistencyError("give exactly one of --matrix, --gram, --embeddings")
    if args.matrix:
        return PairwiseMatrix.load(args.matrix, args.matrix_method)
    if args.gram:
        return GramMatrix.load(args.gram)
    return load_embeddings(args.embeddings)


def cmd_rank(args) -> int:
    ds, _ = _load(args)
    backend = _backend_from_args(args)
    table = backend_ranks(ds, backend, args.k, args.tag)
    table.save(args.out)
    return 0


def cmd_eval(args) -> int:
    gt_table = RankTable.load(args.gt)
    gt = GroundTruth(gt_table, None)
    reports = [evaluate(gt, RankTable.load(p), args.ks, args.binary_precision) for p in args.ranks]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for mode in ("topk", "binary"):
        write_report_csv(reports, out / f"metrics_{mode}.csv", mode)
    for r in reports:
        print(r.backend_tag, " ".join(f"{c}={r.topk[c]:.4f}" for c in r.columns()))
    return 0


def cmd_explain(args) -> int:
    ds, cm = _load(args, min_classes=1)
    query = ds.graph(args.query)
    if args.matrix:
        m = PairwiseMatrix.load(args.matrix, args.method)
        target_id, cost = counterfactual(args.query, ds, m)
        path = ged(query, ds.graph(target_id), cm, args.method, args.node_budget)[1]
    else:
        cands = candidates(ds, args.query)
        if not cands:
            raise EligibilityError(f"no graph with a class other than {ds.labels[args.query]!r}")
        results = {c: ged(query, ds.graph(c), cm, args.method, args.node_budget) for c in cands}
        target_id = min(cands, key=lambda c: (results[c][0], c))
        cost, path = results[target_id]
    target = ds.graph(target_id)
    nodes, edges = apply_edit_path(query, path)
    replay_ok = sorted(nodes.items()) == sorted((n.node_id, n.concept) for n in target.nodes) and edges == sorted(
        (e.source, e.target, e.predicate) for e in target.edges
    )
    record = {
        "query": query.id,
        "query_label": ds.labels[query.id],
        "counterfactual": target.id,
        "counterfactual_label": ds.labels[target.id],
        "cost": cost,
        "path": path.to_dict(),
        "replay_ok": replay_ok,
    }
    print(json.dumps(record, indent=1))
    if not replay_ok:
        raise ConsistencyError("edit path replay does not reproduce the counterfactual graph")
    return 0


def cmd_split(args) -> int:
    ds, _ = _load(args, min_classes=1)
    if args.mode == "dense":
        out = split_dense(ds, args.max_nodes, args.min_density, args.max_isolated_fraction, args.n)
    else:
        out = split_random(ds, args.n, args.seed)
    save_dataset(out, args.out_graphs, args.out_labels)
    log.info("wrote %d graphs", len(out))
    return 0


# ---------------------------------------------------------------- pipeline


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


class StageError(ScenecfError):
    category = "stage"


@contextmanager
def _stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except ScenecfError as exc:
        err = type(exc)(f"stage {name!r} failed: {exc}")
        raise err from exc
    except Exception as exc:
        raise StageError(f"stage {name!r} failed: {type(exc).__name__}: {exc}") from exc


PIPELINE_PARAMS = (
    "gt_method", "backend_method", "node_budget", "kernels", "embeddings", "wl_embedding", "embed_dim",
    "embed_seed", "ks", "binary_precision", "raw_hop_del_cost", "root", "directional", "wl_iterations",
    "nh_iterations", "nh_bits", "rw_lambda", "gs_graphlet_size", "gs_samples", "gs_seed",
)


def _apply_manifest(args) -> None:
    manifest = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
    for key, value in manifest["params"].items():
        setattr(args, key, tuple(value) if key == "ks" else value)
    for key, value in manifest["inputs"].items():
        if key == "embeddings":
            args.embeddings = [f"{tag}={entry['path']}" for tag, entry in value.items()]
            for tag, entry in value.items():
                if _digest(entry["path"]) != entry["sha256"]:
                    raise ConsistencyError(f"input {entry['path']} changed since the manifest was written")
            continue
        setattr(args, key, value["path"])
        if _digest(value["path"]) != value["sha256"]:
            raise ConsistencyError(f"input {value['path']} changed since the manifest was written")


def _embedding_specs(items) -> dict:
    specs = {}
    for item in items or []:
        tag, sep, path = item.partition("=")
        if not sep or not tag or not path:
            raise ConsistencyError(f"--embeddings expects TAG=PATH, got {item!r}")
        specs[tag] = path
    return specs


def cmd_pipeline(args) -> int:
    if args.from_manifest:
        _apply_manifest(args)
    if not all((args.graphs, args.labels, args.taxonomy)):
        raise ConsistencyError("pipeline needs --graphs, --labels and --taxonomy (or --from-manifest)")
    out = Path(args.out_dir)
    created_dir = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str) -> Path:
        p = out / name
        written.append(p)
        return p

    emb_specs = _embedding_specs(args.embeddings)
    kinds = [] if args.kernels.lower() == "none" else [k.strip().upper() for k in args.kernels.split(",") if k.strip()]
    try:
        with _stage("load"):
            ds, cm = _load(args)
        with _stage("ground-truth"):
            gt_matrix = pairwise_ged_matrix(ds, cm, args.gt_method, args.workers, args.directional, args.node_budget)
            gt_matrix.save(emit(f"ged_{args.gt_method}.csv"))
            gt = ground_truth_ranks(ds, gt_matrix)
            gt.table.save(emit("ranks_ground_truth.json"))
        tables = []
        if args.backend_method and args.backend_method != "none":
            with _stage(f"ged-{args.backend_method}"):
                if args.backend_method == args.gt_method:
                    m = gt_matrix
                else:
                    m = pairwise_ged_matrix(ds, cm, args.backend_method, args.workers, args.directional, args.node_budget)
                    m.save(emit(f"ged_{args.backend_method}.csv"))
                tables.append(backend_ranks(ds, m, max(args.ks)))
        for kind in kinds:
            with _stage(f"kernel-{kind}"):
                gm = gram(ds, _kernel_config(args, kind), normalize=True)
                gm.save(emit(f"gram_{kind}.csv"))
                written.append(out / f"gram_{kind}.csv.config.json")
                tables.append(backend_ranks(ds, gm, max(args.ks)))
        if args.wl_embedding:
            with _stage("embedding-wl"):
                table = wl_feature_embedding(ds, KernelConfig("WL", wl_iterations=args.wl_iterations),
                                             args.embed_dim, args.embed_seed)
                table.save(emit("embedding_wl.csv"))
                tables.append(backend_ranks(ds, table, max(args.ks), "embedding-wl"))
        for tag, path in emb_specs.items():
            with _stage(f"embedding-{tag}"):
                tables.append(backend_ranks(ds, load_embeddings(path, tag), max(args.ks), f"embedding-{tag}"))
        with _stage("evaluate"):
            reports = []
            for t in tables:
                t.save(emit(f"ranks_{t.backend_tag}.json"))
                reports.append(evaluate(gt, t, args.ks, args.binary_precision))
            if reports:
                write_report_csv(reports, emit("metrics_topk.csv"), "topk")
                write_report_csv(reports, emit("metrics_binary.csv"), "binary")
        with _stage("manifest"):
            inputs = {
                key: {"path": str(getattr(args, key)), "sha256": _digest(getattr(args, key))}
                for key in ("graphs", "labels", "taxonomy")
            }
            if emb_specs:
                inputs["embeddings"] = {tag: {"path": p, "sha256": _digest(p)} for tag, p in emb_specs.items()}
            params = {key: getattr(args, key) for key in PIPELINE_PARAMS if key != "embeddings"}
            params["ks"] = list(args.ks)
            manifest = {
                "tool": "scenecf",
                "version": __version__,
                "inputs": inputs,
                "params": params,
                "outputs": {p.name: _digest(p) for p in written if p.exists()},
            }
            emit("manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created_dir:
            shutil.rmtree(out, ignore_errors=True)
        raise
    for r in reports:
        print(r.backend_tag, " ".join(f"{c}={r.topk[c]:.4f}" for c in r.columns()))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenecf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"scenecf {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ged", help="edit distance of one graph pair")
    _add_data(p)
    _add_ged(p)
    p.add_argument("--a", required=True, help="source graph id")
    p.add_argument("--b", required=True, help="target graph id")
    p.add_argument("--path", action="store_true", help="also print the edit path as JSON")
    p.add_argument("--precision", type=int, default=DEFAULTS["precision"], help="decimals of the printed cost")
    p.set_defaults(func=cmd_ged)

    p = sub.add_parser("matrix", help="pairwise edit-distance matrix")
    _add_data(p)
    _add_ged(p)
    _add_workers(p)
    p.add_argument("--directional", action="store_true", help="compute both triangles instead of mirroring")
    p.add_argument("--out", required=True, help="output .csv or .npz")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("gram", help="graph-kernel Gram matrix")
    _add_data(p, taxonomy=False)
    _add_kernel(p)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", required=True, help="output CSV (a .config.json sidecar is written next to it)")
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("embed", help="hashed WL feature embedding")
    _add_data(p, taxonomy=False)
    p.add_argument("--wl-iterations", type=int, default=DEFAULTS["wl_iterations"])
    p.add_argument("--dim", type=int, default=DEFAULTS["embed_dim"])
    p.add_argument("--seed", type=int, default=DEFAULTS["embed_seed"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("rank", help="different-class candidate ranks from one backend")
    _add_data(p, taxonomy=False)
    p.add_argument("--matrix", help="edit-distance matrix (sorted ascending)")
    p.add_argument("--matrix-method", default="approx", help="label recorded for a CSV matrix")
    p.add_argument("--gram", help="Gram matrix CSV (sorted descending)")
    p.add_argument("--embeddings", help="embedding CSV (cosine, sorted descending)")
    p.add_argument("--k", type=int, default=None, help="truncate lists to k (default: full order)")
    p.add_argument("--tag", default=None, help="backend tag written in the header")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="P@k and NDCG@k against a ground-truth rank file")
    p.add_argument("--gt", required=True, help="full ground-truth rank JSON (rank --matrix without --k)")
    p.add_argument("--ranks", nargs="+", required=True, help="backend rank JSON files")
    p.add_argument("--ks", type=_parse_ks, default=_parse_ks(DEFAULTS["ks"]))
    p.add_argument("--binary-precision", choices=("hit_rate", "fraction"), default=DEFAULTS["binary_precision"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="counterfactual graph and edit path for one query")
    _add_data(p)
    _add_ged(p)
    p.add_argument("--query", required=True)
    p.add_argument("--matrix", default=None, help="precomputed edit-distance matrix for the retrieval step")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("split", help="dense or random subset of a dataset")
    _add_data(p, taxonomy=False)
    p.add_argument("--mode", choices=("dense", "random"), required=True)
    p.add_argument("--n", type=int, default=DEFAULTS["split_n"])
    p.add_argument("--seed", type=int, default=DEFAULTS["split_seed"])
    p.add_argument("--max-nodes", type=int, default=DEFAULTS["max_nodes"])
    p.add_argument("--min-density", type=float, default=DEFAULTS["min_density"])
    p.add_argument("--max-isolated-fraction", type=float, default=DEFAULTS["max_isolated_fraction"])
    p.add_argument("--out-graphs", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("pipeline", help="ground truth, backends, ranks and metrics in one run")
    p.add_argument("--graphs")
    p.add_argument("--labels")
    p.add_argument("--taxonomy")
    p.add_argument("--root", default=None)
    p.add_argument("--raw-hop-del-cost", action="store_true")
    p.add_argument("--gt-method", choices=("exact", "approx"), default="exact")
    p.add_argument("--backend-method", choices=("exact", "approx", "none"), default="approx")
    p.add_argument("--node-budget", type=int, default=DEFAULTS["node_budget"])
    p.add_argument("--directional", action="store_true")
    _add_kernel(p, multiple=True)
    p.add_argument("--wl-embedding", action="store_true", help="add the hashed WL embedding backend")
    p.add_argument("--embed-dim", type=int, default=DEFAULTS["embed_dim"])
    p.add_argument("--embed-seed", type=int, default=DEFAULTS["embed_seed"])
    p.add_argument("--embeddings", nargs="*", default=[], help="external embeddings as TAG=PATH")
    p.add_argument("--ks", type=_parse_ks, default=_parse_ks(DEFAULTS["ks"]))
    p.add_argument("--binary-precision", choices=("hit_rate", "fraction"), default=DEFAULTS["binary_precision"])
    _add_workers(p)
    p.add_argument("--from-manifest", default=None, help="rerun with the inputs and parameters of a manifest")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ScenecfError as exc:
        print(f"scenecf: {exc.category} error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"scenecf: io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
