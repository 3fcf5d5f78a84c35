import json

import pytest

from medrank.cli import main
from medrank.corpus import write_jsonl
from medrank.trecio import read_run
from tests.conftest import PY, planted_fixture, write_qrels, write_topics_tsv


@pytest.fixture
def workspace(tmp_path):
    docs, topics, qrels, relevant = planted_fixture()
    corpus = tmp_path / "corpus.jsonl"
    write_jsonl(docs, corpus)
    topics_file = tmp_path / "topics.tsv"
    write_topics_tsv(topics, topics_file)
    qrels_file = tmp_path / "qrels.txt"
    write_qrels(qrels, qrels_file)
    return tmp_path, corpus, topics_file, qrels_file


def oracle_cmd(qrels_file) -> str:
    return f"{PY} -m medrank.refscorers grade --qrels {qrels_file}"


class TestStages:
    def test_ingest(self, tmp_path, capsys):
        meta = tmp_path / "metadata.csv"
        meta.write_text(
            "cord_uid,title,abstract,publish_time\n"
            "d1,Title,Abstract,2020-03-15\n"
            "d2,Other,Text,2019\n",
            encoding="utf-8",
        )
        out = tmp_path / "corpus.jsonl"
        assert main(["ingest", "--metadata", str(meta), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["publish_date"] == "2020-03-15"

    def test_filter_corpus(self, workspace, capsys):
        tmp_path, corpus, _, _ = workspace
        out = tmp_path / "filtered.jsonl"
        code = main(["filter-corpus", "--input", str(corpus), "--out", str(out),
                     "--cutoff", "2020-01-01"])
        assert code == 0
        dates = [json.loads(l)["publish_date"] for l in out.read_text().splitlines()]
        assert all(d is not None and d[:4] >= "2020" for d in dates)
        assert "dropped" in capsys.readouterr().out

    def test_index_and_search(self, workspace, capsys):
        tmp_path, corpus, topics_file, _ = workspace
        idx = tmp_path / "full.idx"
        assert main(["index", "--corpus", str(corpus), "--out", str(idx)]) == 0
        run_file = tmp_path / "bm25.run"
        assert main(["search", "--index", str(idx), "--topics", str(topics_file),
                     "--k", "10", "--out", str(run_file)]) == 0
        run = read_run(run_file)
        assert set(run.entries) == {"q1", "q2", "q3", "q4", "q5"}

    def test_paragraph_index_search_collapses_to_docs(self, tmp_path):
        from tests.conftest import make_doc
        docs = [
            make_doc("d1", paragraphs=["vaccine data here", "unrelated text"],
                     date="2020-02-02"),
            make_doc("d2", paragraphs=["vaccine vaccine vaccine"],
                     date="2020-02-02"),
        ]
        corpus = tmp_path / "c.jsonl"
        write_jsonl(docs, corpus)
        topics = tmp_path / "topics.tsv"
        topics.write_text("1\t\tvaccine\t\n", encoding="utf-8")
        idx = tmp_path / "para.idx"
        assert main(["index", "--corpus", str(corpus), "--field", "paragraph",
                     "--out", str(idx)]) == 0
        out = tmp_path / "para.run"
        assert main(["search", "--index", str(idx), "--topics", str(topics),
                     "--k", "10", "--out", str(out)]) == 0
        run = read_run(out)
        doc_ids = [d for d, _ in run.entries["1"]]
        assert sorted(doc_ids) == ["d1", "d2"]

    def test_filter_queries(self, tmp_path, capsys):
        queries = tmp_path / "queries.tsv"
        queries.write_text(
            "7\tasthma drugs\n3\tnatural gas price\n9\tcar loan\n",
            encoding="utf-8",
        )
        lexicon = tmp_path / "lexicon.txt"
        lexicon.write_text("asthma\ngas\n", encoding="utf-8")
        ids = tmp_path / "ids.txt"
        code = main(["filter-queries", "--queries", str(queries), "--lexicon",
                     str(lexicon), "--out-ids", str(ids)])
        assert code == 0
        assert ids.read_text() == "7\n"  # 'gas' excluded by bundled defaults
        assert "retention" in capsys.readouterr().out

    def test_fuse(self, workspace, tmp_path):
        _, corpus, topics_file, _ = workspace
        idx = tmp_path / "a.idx"
        main(["index", "--corpus", str(corpus), "--out", str(idx)])
        run_a = tmp_path / "a.run"
        run_b = tmp_path / "b.run"
        main(["search", "--index", str(idx), "--topics", str(topics_file),
              "--k", "10", "--out", str(run_a), "--tag", "a"])
        main(["search", "--index", str(idx), "--topics", str(topics_file),
              "--k", "5", "--out", str(run_b), "--tag", "b"])
        fused = tmp_path / "fused.run"
        assert main(["fuse", "--runs", str(run_a), str(run_b),
                     "--out", str(fused)]) == 0
        assert read_run(fused).tag == "fused"

    def test_make_training(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text("q1\tp1\tp2\nq2\tp1\tp2\n", encoding="utf-8")
        ids = tmp_path / "ids.txt"
        ids.write_text("q1\n", encoding="utf-8")
        queries = tmp_path / "queries.tsv"
        queries.write_text("q1\tasthma care\nq2\tcar loan\n", encoding="utf-8")
        passages = tmp_path / "passages.tsv"
        passages.write_text("p1\tinhaler study\np2\tauto financing\n",
                            encoding="utf-8")
        out = tmp_path / "triples.tsv"
        code = main(["make-training", "--pairs", str(pairs), "--accept-ids",
                     str(ids), "--queries", str(queries), "--passages",
                     str(passages), "--out", str(out)])
        assert code == 0
        assert out.read_text() == "asthma care\tinhaler study\tauto financing\n"


class TestPipelineCommand:
    def test_equals_manual_chaining(self, workspace):
        tmp_path, corpus, topics_file, qrels_file = workspace
        scorer = oracle_cmd(qrels_file)

        filtered = tmp_path / "filtered.jsonl"
        main(["filter-corpus", "--input", str(corpus), "--out", str(filtered)])
        idx = tmp_path / "full.idx"
        main(["index", "--corpus", str(filtered), "--out", str(idx)])
        bm25_run = tmp_path / "bm25.run"
        main(["search", "--index", str(idx), "--topics", str(topics_file),
              "--k", "30", "--out", str(bm25_run), "--tag", "medrank"])
        manual_run = tmp_path / "manual.run"
        main(["rerank", "--run", str(bm25_run), "--topics", str(topics_file),
              "--corpus", str(filtered), "--scorer-pipe", scorer,
              "--depth", "30", "--out", str(manual_run)])

        auto_run = tmp_path / "auto.run"
        code = main(["pipeline", "--corpus", str(corpus), "--topics",
                     str(topics_file), "--scorer-pipe", scorer, "--first-k", "30",
                     "--depth", "30", "--out", str(auto_run)])
        assert code == 0
        assert auto_run.read_bytes() == manual_run.read_bytes()

    def test_no_rerank_degrades_to_bm25(self, workspace):
        tmp_path, corpus, topics_file, _ = workspace
        out = tmp_path / "bm25only.run"
        code = main(["pipeline", "--corpus", str(corpus), "--topics",
                     str(topics_file), "--no-rerank", "--out", str(out)])
        assert code == 0
        assert read_run(out).entries

    def test_rerun_is_byte_identical(self, workspace):
        tmp_path, corpus, topics_file, qrels_file = workspace
        scorer = oracle_cmd(qrels_file)
        out1 = tmp_path / "r1.run"
        out2 = tmp_path / "r2.run"
        argv = ["pipeline", "--corpus", str(corpus), "--topics", str(topics_file),
                "--scorer-pipe", scorer, "--first-k", "20", "--depth", "20"]
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestEvaluateCommand:
    def make_run(self, workspace):
        tmp_path, corpus, topics_file, qrels_file = workspace
        run_file = tmp_path / "oracle.run"
        main(["pipeline", "--corpus", str(corpus), "--topics", str(topics_file),
              "--scorer-pipe", oracle_cmd(qrels_file), "--first-k", "30",
              "--depth", "30", "--out", str(run_file)])
        return run_file

    def test_eight_metric_columns_for_both(self, workspace, capsys):
        tmp_path, _, _, qrels_file = workspace
        run_file = self.make_run(workspace)
        code = main(["evaluate", "--run", str(run_file), "--qrels",
                     str(qrels_file), "--metrics", "ndcg@10,p@5,p@5f,j@10",
                     "--condensed", "both"])
        assert code == 0
        out = capsys.readouterr().out
        assert "including unjudged" in out
        assert "judged only" in out
        row = next(l for l in out.splitlines() if l.startswith("medrank"))
        assert len(row.split()) == 1 + 8

    def test_tsv_and_figures(self, workspace, capsys):
        tmp_path, _, _, qrels_file = workspace
        run_file = self.make_run(workspace)
        tsv = tmp_path / "metrics.tsv"
        figs = tmp_path / "figs"
        code = main(["evaluate", "--run", str(run_file), "--qrels",
                     str(qrels_file), "--metrics", "ndcg@10,p@5",
                     "--condensed", "no", "--out-tsv", str(tsv),
                     "--figures", str(figs)])
        assert code == 0
        lines = tsv.read_text().splitlines()
        assert "ndcg@10\tq1\t1.0000" in lines
        assert any(l.startswith("ndcg@10\tall\t") for l in lines)
        pngs = list(figs.glob("*.png"))
        assert len(pngs) == 2
        assert all(p.stat().st_size > 0 for p in pngs)

    def test_missing_run_file_exits_2(self, workspace, capsys):
        tmp_path, _, _, qrels_file = workspace
        code = main(["evaluate", "--run", str(tmp_path / "missing.run"),
                     "--qrels", str(qrels_file)])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestCompareCommand:
    def test_stars_on_significant_baseline(self, workspace, capsys):
        tmp_path, corpus, topics_file, qrels_file = workspace
        good = TestEvaluateCommand().make_run(workspace)
        # a baseline retrieving only unjudged filler scores zero everywhere
        bad = tmp_path / "bad.run"
        bad.write_text(
            "".join(
                f"q{t} Q0 f0{t} 1 1.000000 weak\n" for t in range(1, 6)
            ),
            encoding="utf-8",
        )
        code = main(["compare", "--candidate", str(good), "--baselines",
                     str(bad), "--qrels", str(qrels_file),
                     "--metrics", "ndcg@10,p@5", "--condensed", "no"])
        assert code == 0
        out = capsys.readouterr().out
        row = next(l for l in out.splitlines() if l.startswith("weak"))
        assert "*" in row
        assert "Bonferroni" in out

    def test_comparison_figure(self, workspace, capsys):
        tmp_path, _, _, qrels_file = workspace
        good = TestEvaluateCommand().make_run(workspace)
        figs = tmp_path / "cmp"
        code = main(["compare", "--candidate", str(good), "--baselines",
                     str(good), "--qrels", str(qrels_file), "--condensed", "no",
                     "--figures", str(figs)])
        assert code == 0
        assert (figs / "comparison.png").stat().st_size > 0


class TestConfigAndErrors:
    def test_config_file_fills_unset_flags(self, workspace):
        tmp_path, corpus, topics_file, _ = workspace
        idx = tmp_path / "x.idx"
        main(["index", "--corpus", str(corpus), "--out", str(idx)])
        cfg = tmp_path / "search.cfg"
        cfg.write_text("k=3\ntag=fromfile\n", encoding="utf-8")
        out = tmp_path / "cfg.run"
        code = main(["search", "--index", str(idx), "--topics", str(topics_file),
                     "--config", str(cfg), "--tag", "fromcli", "--out", str(out)])
        assert code == 0
        run = read_run(out)
        assert run.tag == "fromcli"  # explicit flag beats the file
        assert all(len(v) <= 3 for v in run.entries.values())

    def test_unknown_config_key_exits_2(self, workspace, capsys):
        tmp_path, corpus, topics_file, _ = workspace
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus=1\n", encoding="utf-8")
        code = main(["filter-corpus", "--input", str(corpus),
                     "--out", str(tmp_path / "o.jsonl"), "--config", str(cfg)])
        assert code == 2

    def test_unknown_flag_exits_2(self, workspace):
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", "--frobnicate"])
        assert exc.value.code == 2

    def test_scorer_contract_violation_exits_nonzero(self, workspace, capsys):
        tmp_path, corpus, topics_file, qrels_file = workspace
        out = tmp_path / "x.run"
        code = main(["pipeline", "--corpus", str(corpus), "--topics",
                     str(topics_file), "--scorer-pipe",
                     f"{PY} -m medrank.refscorers echo --mode nan",
                     "--out", str(out)])
        assert code == 1
        assert "error:" in capsys.readouterr().err
