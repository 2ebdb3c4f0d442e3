"""Run the five shipped pipelines on a synthetic corpus and print a comparison table.

    python3 scripts/run_pipelines.py --out runs/ --num-docs 3000
"""

import argparse
from pathlib import Path

from sparsecascade.metrics import compare_table, ndcg_at_k
from sparsecascade.pipeline import execute, load_pipeline
from sparsecascade.store import read_qrels, read_run
from sparsecascade.synth import SynthConfig, synth_corpus

PIPELINES = Path(__file__).resolve().parent.parent / "pipelines"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--num-docs", type=int, default=2000)
    ap.add_argument("--num-queries", type=int, default=50)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    data = args.out / "data"
    synth_corpus(SynthConfig(seed=args.seed, num_docs=args.num_docs, num_queries=args.num_queries)).write(data)
    qrels = read_qrels(data / "qrels.txt")

    reports = []
    for i in range(1, 6):
        spec = load_pipeline(PIPELINES / f"run{i}.toml", data)
        workdir = args.out / spec.name
        execute(spec, workdir, threads=args.threads)
        final = next(s for s in spec.stages.values() if s.type == "evaluate").params["input"]
        reports.append((f"RUN{i}", ndcg_at_k(read_run(workdir / final / "run.trec"), qrels, 20)))
    # the second retriever on its own, as a reference row
    view_b = read_run(args.out / "run2" / "second" / "run.trec")
    reports.insert(1, ("view-b", ndcg_at_k(view_b, qrels, 20)))
    print(compare_table(reports), end="")


if __name__ == "__main__":
    main()
