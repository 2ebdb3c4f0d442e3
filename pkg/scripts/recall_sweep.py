"""Approximate-search recall@k against exact search over a sweep of alpha.

    python3 scripts/recall_sweep.py --num-docs 5000 --beta 16
"""

import argparse
import time

from sparsecascade.index import ApproxConfig, build_index, recall_vs_exact
from sparsecascade.synth import SynthConfig, synth_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--num-docs", type=int, default=2000)
    ap.add_argument("--num-queries", type=int, default=50)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--beta", type=int, default=16)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--doc-pool", type=int)
    ap.add_argument("--query-pool", type=int)
    args = ap.parse_args()

    corpus = synth_corpus(SynthConfig(seed=args.seed, num_docs=args.num_docs, num_queries=args.num_queries))
    index = build_index(corpus.docs["a"], args.doc_pool)
    queries = [(r.id, r.vector) for r in corpus.queries["a"]]
    print(f"alpha\trecall@{args.k}\tms/query")
    for step in range(1, 11):
        alpha = step / 10
        start = time.perf_counter()
        rep = recall_vs_exact(index, queries, args.k, ApproxConfig(alpha, args.beta, args.gamma), args.query_pool)
        ms = 1000 * (time.perf_counter() - start) / max(1, len(queries))
        print(f"{alpha:.1f}\t{rep.mean:.4f}\t{ms:.2f}")


if __name__ == "__main__":
    main()
