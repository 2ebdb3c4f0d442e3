import json
import subprocess
import sys
from pathlib import Path

import pytest

from sparsecascade.cli import main
from sparsecascade.store import read_run

SHIPPED = Path(__file__).resolve().parent.parent / "pipelines"


@pytest.fixture(scope="module")
def runs(small_corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    d = small_corpus_dir
    for view in ("a", "b"):
        assert main(["index", "build", "--vectors", str(d / f"docs.{view}.jsonl"), "--out", str(out / f"{view}.idx")]) == 0
        assert main([
            "search", "--index", str(out / f"{view}.idx"), "--queries", str(d / f"queries.{view}.jsonl"),
            "--k", "200", "--run-tag", view, "--out", str(out / f"{view}.trec"),
        ]) == 0
    return out


def test_search_writes_valid_run(runs):
    run = read_run(runs / "a.trec")
    assert run.tag == "a" and len(run.queries) == 20
    run.validate()


def test_index_search_approx_matches_alias(runs, small_corpus_dir, tmp_path):
    common = ["--index", str(runs / "a.idx"), "--queries", str(small_corpus_dir / "queries.a.jsonl"),
              "--k", "50", "--run-tag", "x", "--approx", "--alpha", "0.3"]
    assert main(["index", "search", *common, "--out", str(tmp_path / "1.trec")]) == 0
    assert main(["search", *common, "--out", str(tmp_path / "2.trec")]) == 0
    assert (tmp_path / "1.trec").read_bytes() == (tmp_path / "2.trec").read_bytes()


def test_stats_and_recall(runs, small_corpus_dir, capsys):
    assert main(["index", "stats", "--vectors", str(small_corpus_dir / "docs.a.jsonl"), "--pool", "10"]) == 0
    out = capsys.readouterr().out
    assert "count\t400" in out and "max_l0\t10" in out
    assert main(["index", "recall", "--index", str(runs / "a.idx"),
                 "--queries", str(small_corpus_dir / "queries.a.jsonl"), "--alphas", "0.5,1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "alpha\trecall@20" and lines[-1] == "1\t1.0000"


def test_fuse_rerank_eval_chain(runs, small_corpus_dir, tmp_path, capsys):
    qrels = str(small_corpus_dir / "qrels.txt")
    fused = tmp_path / "fused.trec"
    assert main(["fuse", "rrf", "--runs", str(runs / "a.trec"), str(runs / "b.trec"),
                 "--k", "10", "--tag", "fused", "--out", str(fused)]) == 0
    assert main(["rerank", "extract", "--run", str(fused), "--n", "50", "--out", str(tmp_path / "c.jsonl")]) == 0
    assert main(["rerank", "builtin", "--run", str(fused), "--n", "50", "--mode", "oracle",
                 "--qrels", qrels, "--out", str(tmp_path / "s.jsonl")]) == 0
    reranked = tmp_path / "rr.trec"
    assert main(["rerank", "splice", "--run", str(fused), "--n", "50",
                 "--scores", str(tmp_path / "s.jsonl"), "--out", str(reranked)]) == 0
    capsys.readouterr()
    assert main(["eval", "--run", str(reranked), "--qrels", qrels, "--per-query", str(tmp_path / "pq.tsv")]) == 0
    assert capsys.readouterr().out.startswith("nDCG@20\t")
    assert main(["eval", "compare", "--runs", str(runs / "a.trec"), str(fused), str(reranked),
                 "--names", "A", "FUSED", "RR", "--qrels", qrels, "--deltas", str(tmp_path / "d.tsv")]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["nDCG@20"] and [r.split()[0] for r in table[1:]] == ["A", "FUSED", "RR"]
    assert (tmp_path / "d.tsv").read_text().startswith("qid\tbase\tother\tdelta\n")


def test_sweep(runs, small_corpus_dir, capsys):
    assert main(["rerank", "sweep", "--run", str(runs / "a.trec"), "--qrels", str(small_corpus_dir / "qrels.txt"),
                 "--builtin", "oracle", "--depths", "10,50,200", "--name", "A"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("A") and lines[2] == "k"
    assert [ln.split()[0] for ln in lines[3:]] == ["10", "50", "200"]


def test_pipeline_commands(small_corpus_dir, tmp_path, capsys):
    assert main(["pipeline", "validate", str(SHIPPED / "run5.toml")]) == 0
    assert main(["--threads", "2", "pipeline", "run", str(SHIPPED / "run3.toml"),
                 "--data-dir", str(small_corpus_dir), "--workdir", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert "nDCG@20=" in capsys.readouterr().out


def test_invalid_pipeline_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('version = 1\n[stages.a]\ntype = "fuse"\ninputs = ["a", "a"]\n')
    assert main(["pipeline", "validate", str(bad)]) == 1
    assert "cycle" in capsys.readouterr().err
    assert main(["pipeline", "run", str(bad), "--workdir", str(tmp_path / "w")]) == 1


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["eval", "--run", str(tmp_path / "missing.trec"), "--qrels", str(tmp_path / "q")]) == 1
    assert "error:" in capsys.readouterr().err
    (tmp_path / "bad.jsonl").write_text('{"id": "d", "vector": {"1": -2}}\n')
    assert main(["index", "build", "--vectors", str(tmp_path / "bad.jsonl"), "--out", str(tmp_path / "x")]) == 1
    with pytest.raises(SystemExit):
        main(["rerank", "sweep", "--run", "r", "--qrels", "q", "--builtin", "oracle", "--depths", "0"])


def test_synth_command(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--num-docs", "50", "--num-queries", "3",
                 "--vocab-size", "300", "--views", "x"]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["docs.x.jsonl", "qrels.txt", "queries.x.jsonl"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sparsecascade", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
