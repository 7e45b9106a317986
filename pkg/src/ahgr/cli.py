"""Command-line driver.

Commands: ``pipeline`` (files -> views -> basic embeddings -> fusion ->
evaluation), ``reweight``, ``embed-basic``, ``fuse``, ``eval`` and ``synth``.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import basic, evaluation, fusion, reweighting, synthetic
from .errors import AHGRError, DataError, ParameterError
from .graph import AttributedGraph, load_attributes, load_embedding, load_labels, read_edge_list, save_embedding

log = logging.getLogger("ahgr")

# Recommended real-graph settings: h, (delta_T, delta_C, delta_A), delta.
# Plain names are for NMF basic embeddings, ``-line`` ones for imported LINE
# embeddings.
PROFILES = {
    "cornell": (1, (5, 5, 1), 1),
    "texas": (1, (10, 10, 1), 1),
    "washington": (1, (5, 5, 1), 1),
    "wisconsin": (1, (10, 10, 1), 1),
    "twitter": (3, (10, 1, 10), 10),
    "gplus": (2, (1, 1, 1), 10),
    "cora": (4, (1, 1, 1), 10),
    "citeseer": (1, (5, 5, 1), 10),
    "uai2010": (2, (10, 1, 1), 10),
    "blogcatalog": (2, (5, 1, 1), 1),
    "flickr": (2, (10, 1, 10), 10),
    "cornell-line": (1, (10, 10, 1), 10),
    "texas-line": (1, (10, 10, 1), 10),
    "washington-line": (1, (10, 10, 1), 10),
    "wisconsin-line": (1, (10, 10, 1), 10),
    "twitter-line": (2, (5, 1, 10), 10),
    "gplus-line": (2, (10, 5, 1), 10),
    "cora-line": (2, (1, 1, 1), 10),
    "citeseer-line": (8, (5, 5, 1), 10),
    "uai2010-line": (2, (1, 1, 1), 1),
    "blogcatalog-line": (3, (1, 1, 1), 10),
    "flickr-line": (2, (10, 10, 1), 10),
}

DEFAULTS = dict(
    h_max=1, k=64, lambda_t=5.0, lambda_c=1.0, lambda_a=1.0,
    delta_t=1.0, delta_c=1.0, delta_a=1.0, delta_e=1.0, delta_y=1.0,
    tol=1e-6, max_iter=1000, restarts=10, seed=0, jobs=1,
    snmf_tol=1e-6, snmf_max_iter=1000, eval_runs=100, train_fraction=0.1,
)


class UsageError(ParameterError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _d(name):
    return f"(default: {DEFAULTS[name]})"


def _add_graph_flags(p, need_edges=True):
    g = p.add_argument_group("input graph")
    g.add_argument("--edges", required=need_edges, help="edge list file, lines 'u v'")
    g.add_argument("--attrs", help="attribute file, lines 'node attr'")
    g.add_argument("--labels", help="label file, lines 'node label'")
    g.add_argument("--n-nodes", type=int, help="node count (default: max id + 1)")


def _add_source_flags(p):
    g = p.add_argument_group("information sources")
    g.add_argument("--profile", choices=sorted(PROFILES),
                   help="named preset setting --h-max and the delta values; enables "
                        "--community and --attributes (explicit flags still win)")
    g.add_argument("--h-max", type=int, help=f"number of proximity views A^1..A^h {_d('h_max')}")
    g.add_argument("--community", action="store_true", help="add the modularity view (default: off)")
    g.add_argument("--attributes", action="store_true",
                   help="add the attribute cosine view, needs --attrs (default: off)")
    g.add_argument("--external-embedding", action="append", default=[], metavar="PATH",
                   help="extra basic embedding file (repeatable; default: none)")
    g.add_argument("--k", type=int, help=f"embedding dimension {_d('k')}")
    g.add_argument("--lambda-t", type=float, help=f"SNMF regulariser, proximity views {_d('lambda_t')}")
    g.add_argument("--lambda-c", type=float, help=f"SNMF regulariser, community view {_d('lambda_c')}")
    g.add_argument("--lambda-a", type=float, help=f"SNMF regulariser, attribute view {_d('lambda_a')}")
    g.add_argument("--snmf-tol", type=float, help=f"SNMF relative-change threshold {_d('snmf_tol')}")
    g.add_argument("--snmf-max-iter", type=int, help=f"SNMF iteration cap {_d('snmf_max_iter')}")
    g.add_argument("--cache-dir", help="basic-embedding cache (default: OUT/cache; 'none' disables)")


def _add_fusion_flags(p):
    g = p.add_argument_group("fusion")
    g.add_argument("--delta-t", type=float, help=f"transition regulariser, proximity views {_d('delta_t')}")
    g.add_argument("--delta-t-steps", help="comma list overriding --delta-t per proximity step (default: none)")
    g.add_argument("--delta-c", type=float, help=f"transition regulariser, community view {_d('delta_c')}")
    g.add_argument("--delta-a", type=float, help=f"transition regulariser, attribute view {_d('delta_a')}")
    g.add_argument("--delta-e", type=float, help=f"transition regulariser, external embeddings {_d('delta_e')}")
    g.add_argument("--delta-y", type=float, help=f"regulariser of the fused embedding {_d('delta_y')}")
    g.add_argument("--tol", type=float, help=f"relative objective change to stop {_d('tol')}")
    g.add_argument("--max-iter", type=int, help=f"iteration cap per restart {_d('max_iter')}")
    g.add_argument("--restarts", type=int, help=f"random restarts {_d('restarts')}")


def _add_common(p):
    p.add_argument("--seed", type=int, help=f"master random seed {_d('seed')}")
    p.add_argument("--jobs", type=int, help=f"parallel workers {_d('jobs')}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ahgr", description="Adaptive hybrid graph representation of attributed graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pipeline", help="run the full method and write every artefact")
    _add_graph_flags(p)
    _add_source_flags(p)
    _add_fusion_flags(p)
    _add_common(p)
    p.add_argument("--dump-views", action="store_true", help="also write the normalised views (default: off)")
    p.add_argument("--eval-runs", type=int, help=f"evaluation repetitions when labels are given {_d('eval_runs')}")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("reweight", help="write the normalised source views")
    _add_graph_flags(p)
    _add_source_flags(p)
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("embed-basic", help="write one basic embedding per source")
    _add_graph_flags(p)
    _add_source_flags(p)
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fuse", help="fuse basic embedding files")
    p.add_argument("--basic", action="append", required=True, metavar="PATH",
                   help="basic embedding file (repeatable, one per source)")
    p.add_argument("--deltas", help="comma list of per-source transition regularisers (default: 1 each)")
    _add_fusion_flags(p)
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("eval", help="evaluate an embedding against labels")
    p.add_argument("--embedding", required=True, help="embedding file")
    p.add_argument("--labels", required=True, help="label file")
    p.add_argument("--task", choices=("cluster", "classify"), required=True)
    p.add_argument("--runs", type=int, default=DEFAULTS["eval_runs"], help=f"repetitions {_d('eval_runs')}")
    p.add_argument("--train-fraction", type=float, default=DEFAULTS["train_fraction"],
                   help=f"training share for classification {_d('train_fraction')}")
    p.add_argument("--clusters", type=int, help="k for k-means (default: number of label classes)")
    p.add_argument("--reg-strength", type=float, default=1.0, help="classifier L2 weight (default: 1.0)")
    _add_common(p)
    p.add_argument("--out", required=True, help="report CSV path")

    p = sub.add_parser("synth", help="synthetic inconsistency sweep")
    p.add_argument("--case", type=int, choices=(1, 2, 3, 4), required=True,
                   help="1 swap attributes, 2 swap topology, 3 attribute noise, 4 topology noise")
    p.add_argument("--sweep", help="comma list of sweep values (default: 0..1 step 0.1 for cases 1-2, "
                                   "0..12 step 1 for cases 3-4)")
    p.add_argument("--trials", type=int, default=50, help="graphs per sweep value (default: 50)")
    p.add_argument("--k", type=int, default=8, help="embedding dimension (default: 8)")
    p.add_argument("--lambda-t", type=float, default=5.0, help="SNMF regulariser, topology (default: 5.0)")
    p.add_argument("--lambda-a", type=float, default=1.0, help="SNMF regulariser, attributes (default: 1.0)")
    p.add_argument("--delta-t", type=float, default=1.0, help="transition regulariser, topology (default: 1.0)")
    p.add_argument("--delta-a", type=float, default=1.0, help="transition regulariser, attributes (default: 1.0)")
    p.add_argument("--delta-y", type=float, default=1.0, help="fused embedding regulariser (default: 1.0)")
    p.add_argument("--prior-schedule", action="store_true",
                   help="raise delta of the inconsistent source along the sweep (default: off)")
    p.add_argument("--tol", type=float, default=1e-6, help="fusion stop threshold (default: 1e-06)")
    p.add_argument("--max-iter", type=int, default=1000, help="fusion iteration cap (default: 1000)")
    p.add_argument("--restarts", type=int, default=10, help="fusion restarts (default: 10)")
    p.add_argument("--kmeans-runs", type=int, default=100, help="k-means repetitions (default: 100)")
    _add_common(p)
    p.add_argument("--out", required=True, help="CSV output path")
    return parser


def _opt(args, name):
    v = getattr(args, name, None)
    return DEFAULTS[name] if v is None else v


def resolve(args) -> argparse.Namespace:
    """Fill unset options from ``--profile`` first, then from DEFAULTS."""
    prof = PROFILES.get(getattr(args, "profile", None) or "")
    if prof:
        h, (dt, dc, da), dy = prof
        for name, val in (("h_max", h), ("delta_t", dt), ("delta_c", dc), ("delta_a", da), ("delta_y", dy)):
            if getattr(args, name, None) is None:
                setattr(args, name, val)
        args.community = True
        args.attributes = True
    for name in DEFAULTS:
        if hasattr(args, name) and getattr(args, name) is None:
            setattr(args, name, DEFAULTS[name])
    return args


class _Outputs:
    """Tracks written files so a failed command can remove them."""

    def __init__(self, root):
        self.root = Path(root)
        self.created_root = not self.root.exists()
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(p)
        return p

    def rollback(self):
        for p in self.files:
            p.unlink(missing_ok=True)
        for d in sorted({p.parent for p in self.files}, key=lambda q: len(q.parts), reverse=True):
            if d != self.root and d.exists() and not any(d.iterdir()):
                d.rmdir()
        if self.created_root:
            shutil.rmtree(self.root, ignore_errors=True)


def _load_graph(args) -> AttributedGraph:
    if getattr(args, "attributes", False) and not args.attrs:
        raise UsageError("--attributes requires an attribute file via --attrs")
    for flag in ("edges", "attrs", "labels"):
        path = getattr(args, flag, None)
        if path and not os.path.isfile(path):
            raise DataError(f"--{flag}: file not found: {path}")
    A, loops = read_edge_list(args.edges, args.n_nodes)
    if loops:
        log.warning("dropped %d self-loop(s) from %s", loops, args.edges)
    n = A.shape[0]
    C = load_attributes(args.attrs, n) if args.attrs else None
    y = load_labels(args.labels, n) if args.labels else None
    return AttributedGraph(A, C, y)


def _views(args, graph):
    if args.h_max < 0:
        raise UsageError("--h-max must be >= 0")
    if args.h_max == 0 and not (args.community or args.attributes or args.external_embedding):
        raise UsageError("no information source selected")
    if args.h_max == 0 and not (args.community or args.attributes):
        return []
    return reweighting.build_views(graph, args.h_max, args.community, args.attributes)


def _lambda_for(args, kind: reweighting.SourceKind) -> float:
    return {"T": args.lambda_t, "C": args.lambda_c, "A": args.lambda_a}[kind.family]


def _delta_for(args, kind: reweighting.SourceKind) -> float:
    fam = kind.family
    if fam == "T":
        if args.delta_t_steps:
            steps = _floats(args.delta_t_steps, "--delta-t-steps")
            if kind.h <= len(steps):
                return steps[kind.h - 1]
        return args.delta_t
    return {"C": args.delta_c, "A": args.delta_a, "E": args.delta_e}[fam]


def _floats(text, flag):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected a comma separated list of numbers") from None


def _cache_key(M, kind, cfg: basic.SnmfConfig) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(M).tobytes())
    h.update(repr((str(kind), M.shape, cfg.K, cfg.lam, cfg.init, cfg.seed, cfg.tol, cfg.max_iter,
                   cfg.damping)).encode())
    return h.hexdigest()[:32]


def _embed_views(args, views, cache_dir):
    """SNMF basic embedding for each view, reusing cached results."""
    def job(item):
        l, view = item
        cfg = basic.SnmfConfig(args.k, _lambda_for(args, view.kind), args.snmf_tol, args.snmf_max_iter,
                               seed=args.seed)
        if cfg.K > view.matrix.shape[0]:
            raise UsageError(f"--k={cfg.K} exceeds the number of nodes {view.matrix.shape[0]}")
        cached = None
        if cache_dir is not None:
            cached = cache_dir / f"{_cache_key(view.matrix, view.kind, cfg)}.emb"
            if cached.exists():
                X = load_embedding(cached)
                log.info("source %d (%s): cache hit", l, view.kind)
                return basic.BasicEmbedding(X, basic.row_normalize(X), l)
        emb = basic.snmf_embed(view.matrix, cfg, source_id=l)
        log.info("source %d (%s): %d SNMF iterations, objective %.6g", l, view.kind,
                 emb.iterations, emb.final_objective)
        if cached is not None:
            tmp = cached.with_suffix(".tmp")
            save_embedding(tmp, emb.X)
            tmp.replace(cached)
        return emb

    items = list(enumerate(views))
    if args.jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as ex:
            return list(ex.map(job, items))
    return [job(it) for it in items]


def _cache_dir(args, out_root):
    if args.cache_dir == "none":
        return None
    d = Path(args.cache_dir) if args.cache_dir else Path(out_root) / "cache"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _basic_stage(args, graph, out: _Outputs, write_views=False):
    views = _views(args, graph)
    if write_views:
        for l, v in enumerate(views):
            save_embedding(out.path(f"views/view_{l}_{v.kind}.txt"), v.matrix)
    embs = _embed_views(args, views, _cache_dir(args, out.root))
    kinds = [v.kind for v in views]
    for path in args.external_embedding:
        if not os.path.isfile(path):
            raise DataError(f"--external-embedding: file not found: {path}")
        emb = basic.import_basic_embedding(path, graph.n_nodes, args.k, len(embs))
        embs.append(emb)
        kinds.append(reweighting.External(Path(path).stem))
    return kinds, embs


def _write_fusion(out: _Outputs, names, res: fusion.FusionResult):
    save_embedding(out.path("Y.emb"), res.Y)
    for l, U in enumerate(res.U):
        save_embedding(out.path(f"U_{l}.mat"), U)
    with open(out.path("rho.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "rho"])
        for name, r in zip(names, res.rho):
            w.writerow([name, "%.17g" % r])
    with open(out.path("trace.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective"])
        for i, v in enumerate(res.objective_trace):
            w.writerow([i, "%.17g" % v])


def _fusion_config(args, deltas) -> fusion.FusionConfig:
    return fusion.FusionConfig(args.k, deltas, args.delta_y, args.tol, args.max_iter, args.restarts, args.seed)


def cmd_pipeline(args, out: _Outputs):
    graph = _load_graph(args)
    kinds, embs = _basic_stage(args, graph, out, args.dump_views)
    names = [f"{l}_{k}" for l, k in enumerate(kinds)]
    for name, e in zip(names, embs):
        save_embedding(out.path(f"basic_{name}.emb"), e.X)
    deltas = [_delta_for(args, k) for k in kinds]
    res = fusion.fit([e.X_hat for e in embs], _fusion_config(args, deltas))
    log.info("fusion: restart %d won with objective %.6g; rho = %s", res.winning_restart,
             res.objective, ", ".join("%.3f" % r for r in res.rho))
    _write_fusion(out, [str(k) for k in kinds], res)
    if graph.labels is not None:
        _evaluate_into(out, res.Y, graph.labels, args.eval_runs, args.seed)


def _evaluate_into(out, Y, labels, runs, seed):
    rep = evaluation.evaluate_clustering(Y, labels, runs=runs, seed=seed)
    evaluation.write_report(out.path("clustering.csv"), rep)
    if len(np.unique(labels)) > 1 and len(labels) > 2:
        rep = evaluation.evaluate_classification(Y, labels, runs=runs, seed=seed)
        evaluation.write_report(out.path("classification.csv"), rep)


def cmd_reweight(args, out: _Outputs):
    graph = _load_graph(args)
    for l, v in enumerate(_views(args, graph)):
        save_embedding(out.path(f"view_{l}_{v.kind}.txt"), v.matrix)


def cmd_embed_basic(args, out: _Outputs):
    graph = _load_graph(args)
    kinds, embs = _basic_stage(args, graph, out)
    for l, (kind, e) in enumerate(zip(kinds, embs)):
        save_embedding(out.path(f"basic_{l}_{kind}.emb"), e.X)


def cmd_fuse(args, out: _Outputs):
    embs = []
    for path in args.basic:
        if not os.path.isfile(path):
            raise DataError(f"--basic: file not found: {path}")
        embs.append(load_embedding(path))
    n, k = embs[0].shape
    for path, X in zip(args.basic, embs):
        if X.shape != (n, k):
            raise DataError(f"{path}: shape {X.shape} differs from {(n, k)}")
    deltas = _floats(args.deltas, "--deltas") if args.deltas else [1.0] * len(embs)
    if len(deltas) != len(embs):
        raise UsageError(f"--deltas has {len(deltas)} values for {len(embs)} --basic files")
    args.k = k
    res = fusion.fit([basic.row_normalize(X) for X in embs], _fusion_config(args, deltas))
    _write_fusion(out, [Path(p).stem for p in args.basic], res)


def cmd_eval(args):
    Y = load_embedding(args.embedding)
    truth = load_labels(args.labels, Y.shape[0])
    if args.task == "cluster":
        rep = evaluation.evaluate_clustering(Y, truth, args.clusters, args.runs, args.seed)
    else:
        rep = evaluation.evaluate_classification(Y, truth, args.train_fraction, args.runs,
                                                 args.seed, args.reg_strength)
    evaluation.write_report(args.out, rep)


def cmd_synth(args):
    case = synthetic.CASE_BY_ID[args.case]
    if args.sweep:
        values = _floats(args.sweep, "--sweep")
    elif args.case in (1, 2):
        values = [i / 10 for i in range(11)]
    else:
        values = list(range(13))
    cfg = synthetic.SweepConfig(
        K=args.k, lambda_t=args.lambda_t, lambda_a=args.lambda_a, delta_t=args.delta_t,
        delta_a=args.delta_a, delta_y=args.delta_y, prior_schedule=args.prior_schedule,
        tol=args.tol, max_iter=args.max_iter, restarts=args.restarts,
        kmeans_runs=args.kmeans_runs, seed=args.seed)
    rows = synthetic.run_case_sweep(case, values, args.trials, cfg, jobs=args.jobs)
    synthetic.write_sweep_csv(args.out, rows)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    resolve(args)
    out = None
    try:
        if args.command in ("eval", "synth"):
            (cmd_eval if args.command == "eval" else cmd_synth)(args)
            return 0
        out = _Outputs(args.out)
        {"pipeline": cmd_pipeline, "reweight": cmd_reweight,
         "embed-basic": cmd_embed_basic, "fuse": cmd_fuse}[args.command](args, out)
        return 0
    except AHGRError as exc:
        if out is not None:
            out.rollback()
        print(f"ahgr {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        if out is not None:
            out.rollback()
        print(f"ahgr {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
