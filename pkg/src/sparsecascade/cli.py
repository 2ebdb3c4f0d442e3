"""Command line entry point: ``sparsecascade <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .fusion import RrfConfig, rrf_fuse, truncate_run
from .index import ApproxConfig, build_index, recall_vs_exact, search_batch
from .metrics import compare_table, evaluate, format_per_query, per_query_deltas
from .persist import load_index, save_index
from .pipeline import PipelineExecutionError, PipelineSpecError, execute, load_pipeline, validate
from .rerank import (
    BUILTIN_MODES,
    TAIL_POLICIES,
    RerankConfig,
    builtin_reranker,
    depth_sweep,
    extract_candidates,
    read_rerank_scores,
    render_sweep,
    splice_rerank,
    write_candidates,
    write_rerank_scores,
)
from .sparse import collection_stats, top_k_pool
from .store import atomic_write_text, read_qrels, read_run, read_vectors, write_run
from .synth import NNZ_DISTRIBUTIONS, SynthConfig, synth_corpus

log = logging.getLogger("sparsecascade")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("depths must be positive integers")
    return values


def _queries(path):
    return [(r.id, r.vector) for r in read_vectors(path)]


def _approx(args) -> ApproxConfig | None:
    if not args.approx:
        return None
    return ApproxConfig(args.alpha, args.beta, args.gamma)


# -- handlers ----------------------------------------------------------------


def cmd_index_build(args) -> int:
    index = build_index(read_vectors(args.vectors), args.doc_pool)
    save_index(index, args.out)
    s = index.stats()
    log.info("indexed %d docs, %d postings, mean l0 %.2f", s.count, s.total_postings, s.mean_l0)
    return 0


def cmd_index_search(args) -> int:
    index = load_index(args.index)
    run = search_batch(
        index,
        _queries(args.queries),
        args.k,
        args.run_tag,
        query_pool=args.query_pool,
        approx=_approx(args),
        threads=args.threads,
    )
    write_run(run, args.out)
    return 0


def cmd_index_stats(args) -> int:
    vectors = (r.vector for r in read_vectors(args.vectors))
    if args.pool:
        vectors = (top_k_pool(v, args.pool) for v in vectors)
    s = collection_stats(vectors)
    print(f"count\t{s.count}\nmean_l0\t{s.mean_l0:.2f}\nmax_l0\t{s.max_l0}\ntotal_postings\t{s.total_postings}")
    return 0


def cmd_index_recall(args) -> int:
    index = load_index(args.index)
    queries = _queries(args.queries)
    print("alpha\trecall@%d" % args.k)
    for alpha in args.alphas:
        cfg = ApproxConfig(alpha, args.beta, args.gamma)
        rep = recall_vs_exact(index, queries, args.k, cfg, query_pool=args.query_pool)
        print(f"{alpha:g}\t{rep.mean:.4f}")
    return 0


def cmd_fuse_rrf(args) -> int:
    runs = [read_run(p) for p in args.runs]
    if args.depth:
        runs = [truncate_run(r, args.depth) for r in runs]
    write_run(rrf_fuse(runs, RrfConfig(args.k), args.tag), args.out)
    return 0


def cmd_rerank_extract(args) -> int:
    write_candidates(extract_candidates(read_run(args.run), args.n), args.out)
    return 0


def cmd_rerank_builtin(args) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels) if args.qrels else None
    write_rerank_scores(builtin_reranker(run, args.n, args.mode, qrels, args.seed), args.out)
    return 0


def _scores(args, run, depth):
    if args.scores:
        return read_rerank_scores(args.scores)
    qrels = read_qrels(args.qrels) if args.qrels else None
    return builtin_reranker(run, depth, args.builtin, qrels, args.seed)


def cmd_rerank_splice(args) -> int:
    run = read_run(args.run)
    scores = _scores(args, run, args.n)
    out = splice_rerank(run, scores, RerankConfig(args.n, args.tail_policy), args.tag)
    write_run(out, args.out)
    return 0


def cmd_rerank_sweep(args) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    scores = _scores(args, run, max(args.depths))
    rows = depth_sweep(run, scores, args.depths, qrels, args.metric, args.cutoff, args.tail_policy)
    table = render_sweep(args.name or run.tag or "base", evaluate(run, qrels, args.metric, args.cutoff), rows)
    if args.out:
        atomic_write_text(args.out, table)
    sys.stdout.write(table)
    return 0


def cmd_eval(args) -> int:
    if args.eval_cmd == "compare":
        return cmd_eval_compare(args)
    if not args.run or not args.qrels:
        raise ValueError("eval needs --run and --qrels (or use 'eval compare')")
    report = evaluate(read_run(args.run), read_qrels(args.qrels), args.metric, args.k)
    if args.per_query:
        atomic_write_text(args.per_query, format_per_query(report))
    print(f"{report.label}\t{report.mean:.4f}\tqueries={report.num_queries}\tunjudged={report.num_empty}")
    return 0


def cmd_eval_compare(args) -> int:
    qrels = read_qrels(args.qrels)
    names = args.names or [Path(p).stem for p in args.runs]
    if len(names) != len(args.runs):
        raise ValueError("--names must match --runs one to one")
    reports = [(n, evaluate(read_run(p), qrels, args.metric, args.k)) for n, p in zip(names, args.runs)]
    sys.stdout.write(compare_table(reports))
    if args.deltas:
        atomic_write_text(args.deltas, per_query_deltas(reports[0][1], reports[-1][1]))
    return 0


def cmd_pipeline_validate(args) -> int:
    spec = load_pipeline(args.spec, args.data_dir)
    diags = validate(spec)
    for d in diags:
        print(d, file=sys.stderr)
    if not diags:
        print(f"{spec.name}: ok ({len(spec.stages)} stages)")
    return 1 if diags else 0


def cmd_pipeline_run(args) -> int:
    spec = load_pipeline(args.spec, args.data_dir)
    workdir = args.workdir or Path("runs") / spec.name
    manifest = execute(spec, workdir, threads=args.threads)
    for a in manifest["artifacts"]:
        line = f"{a['stage']}\t{a['kind']}\t{a['path']}\t{a['sha256'][:12]}"
        if "mean" in a:
            line += f"\t{a['metric']}={a['mean']:.4f}"
        print(line)
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        seed=args.seed,
        num_docs=args.num_docs,
        num_queries=args.num_queries,
        vocab_size=args.vocab_size,
        doc_nnz=args.doc_nnz,
        query_nnz=args.query_nnz,
        nnz_dist=args.nnz_dist,
        planted_relevance=args.planted_relevance,
        views=tuple(v for v in args.views.split(",") if v),
    )
    paths = synth_corpus(cfg).write(args.out)
    for key, path in paths.items():
        print(f"{key}\t{path}")
    return 0


# -- parser ------------------------------------------------------------------


def _add_search_args(p):
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--query-pool", type=int)
    p.add_argument("--approx", action="store_true")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=int, default=64)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--run-tag", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index_search)


def _add_score_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", help="JSON Lines reranker scores")
    src.add_argument("--builtin", choices=BUILTIN_MODES)
    p.add_argument("--qrels", help="needed by --builtin oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tail-policy", choices=TAIL_POLICIES, default="append_below")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsecascade", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build, search and inspect indexes")
    isub = p_index.add_subparsers(dest="index_cmd", required=True)
    p = isub.add_parser("build")
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--doc-pool", type=int)
    p.set_defaults(func=cmd_index_build)
    _add_search_args(isub.add_parser("search"))
    p = isub.add_parser("stats", help="l0 statistics of a vector file")
    p.add_argument("--vectors", required=True)
    p.add_argument("--pool", type=int)
    p.set_defaults(func=cmd_index_stats)
    p = isub.add_parser("recall", help="approximate-vs-exact recall over an alpha sweep")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--query-pool", type=int)
    p.add_argument("--alphas", type=lambda s: [float(x) for x in s.split(",")],
                   default=[0.1 * i for i in range(1, 11)])
    p.add_argument("--beta", type=int, default=64)
    p.add_argument("--gamma", type=float, default=1.0)
    p.set_defaults(func=cmd_index_recall)

    _add_search_args(sub.add_parser("search", help="alias of 'index search'"))

    p_fuse = sub.add_parser("fuse", help="rank fusion")
    fsub = p_fuse.add_subparsers(dest="fuse_cmd", required=True)
    p = fsub.add_parser("rrf")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--k", type=float, default=60.0)
    p.add_argument("--depth", type=int, help="truncate inputs before fusing")
    p.add_argument("--tag", default="rrf")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse_rrf)

    p_rr = sub.add_parser("rerank", help="rerank cascades")
    rsub = p_rr.add_subparsers(dest="rerank_cmd", required=True)
    p = rsub.add_parser("extract")
    p.add_argument("--run", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerank_extract)
    p = rsub.add_parser("builtin", help="write built-in reranker scores")
    p.add_argument("--run", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--mode", choices=BUILTIN_MODES, default="identity")
    p.add_argument("--qrels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerank_builtin)
    p = rsub.add_parser("splice")
    p.add_argument("--run", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--tag", default="rerank")
    p.add_argument("--out", required=True)
    _add_score_source(p)
    p.set_defaults(func=cmd_rerank_splice)
    p = rsub.add_parser("sweep")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--depths", type=_int_list, default=[10, 20, 50, 100, 200, 500, 1000])
    p.add_argument("--metric", default="ndcg")
    p.add_argument("--cutoff", type=int, default=20)
    p.add_argument("--name")
    p.add_argument("--out")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores")
    src.add_argument("--builtin", choices=BUILTIN_MODES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tail-policy", choices=TAIL_POLICIES, default="append_below")
    p.set_defaults(func=cmd_rerank_sweep)

    p_eval = sub.add_parser("eval", help="nDCG@k / recall@k")
    p_eval.add_argument("--run")
    p_eval.add_argument("--qrels")
    p_eval.add_argument("--metric", choices=("ndcg", "ndcg_exp", "recall"), default="ndcg")
    p_eval.add_argument("--k", type=int, default=20)
    p_eval.add_argument("--per-query")
    p_eval.set_defaults(func=cmd_eval)
    esub = p_eval.add_subparsers(dest="eval_cmd")
    p = esub.add_parser("compare")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--names", nargs="+")
    p.add_argument("--qrels", required=True)
    p.add_argument("--metric", choices=("ndcg", "ndcg_exp", "recall"), default="ndcg")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--deltas", help="per-query TSV of last run minus first")
    p.set_defaults(func=cmd_eval)

    p_pipe = sub.add_parser("pipeline", help="declarative stage graphs")
    psub = p_pipe.add_subparsers(dest="pipeline_cmd", required=True)
    for name, func in (("validate", cmd_pipeline_validate), ("run", cmd_pipeline_run)):
        p = psub.add_parser(name)
        p.add_argument("spec")
        p.add_argument("--data-dir")
        if name == "run":
            p.add_argument("--workdir")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write a seeded synthetic collection")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-docs", type=int, default=2000)
    p.add_argument("--num-queries", type=int, default=50)
    p.add_argument("--vocab-size", type=int, default=5000)
    p.add_argument("--doc-nnz", type=int, default=60)
    p.add_argument("--query-nnz", type=int, default=20)
    p.add_argument("--nnz-dist", choices=NNZ_DISTRIBUTIONS, default="poisson")
    p.add_argument("--planted-relevance", type=int, default=5)
    p.add_argument("--views", default="a,b")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except PipelineExecutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({k: v for k, v in exc.manifest.items() if k != "artifacts"}), file=sys.stderr)
        return 1
    except (ValueError, OSError, PipelineSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
