"""Rerank depth sweep: nDCG@20 after splicing a reranker into the top-k of a first-stage run.

    python3 scripts/depth_sweep.py --reranker oracle
    python3 scripts/depth_sweep.py --reranker noise --seed 3
"""

import argparse

from sparsecascade.fusion import RrfConfig, rrf_fuse
from sparsecascade.index import build_index, search_batch
from sparsecascade.metrics import ndcg_at_k
from sparsecascade.rerank import BUILTIN_MODES, builtin_reranker, depth_sweep, render_sweep
from sparsecascade.synth import SynthConfig, synth_corpus

DEPTHS = [10, 20, 50, 100, 200, 500, 1000]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--num-docs", type=int, default=2000)
    ap.add_argument("--num-queries", type=int, default=50)
    ap.add_argument("--reranker", choices=BUILTIN_MODES, default="oracle")
    ap.add_argument("--fused", action="store_true", help="sweep over the RRF(k=10) fusion of both views")
    args = ap.parse_args()

    corpus = synth_corpus(SynthConfig(seed=args.seed, num_docs=args.num_docs, num_queries=args.num_queries))
    runs = []
    for view in ("a", "b") if args.fused else ("a",):
        index = build_index(corpus.docs[view])
        runs.append(search_batch(index, [(r.id, r.vector) for r in corpus.queries[view]], max(DEPTHS), view))
    run = rrf_fuse(runs, RrfConfig(10), "fused") if args.fused else runs[0]
    scores = builtin_reranker(run, max(DEPTHS), args.reranker, corpus.qrels, args.seed)
    rows = depth_sweep(run, scores, DEPTHS, corpus.qrels)
    print(render_sweep(run.tag, ndcg_at_k(run, corpus.qrels, 20), rows), end="")


if __name__ == "__main__":
    main()
