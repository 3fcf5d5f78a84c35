"""Command-line entry point: every pipeline stage individually plus the
full composition.

Flags can also come from a config file of flat ``key=value`` lines whose
keys mirror the long flag names; explicit flags win over the file.
Exit codes: 0 success, 1 internal or runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import corpus as corpusmod
from . import lexfilter as lexmod
from . import metrics as metricsmod
from . import pipeline as pipemod
from . import report as reportmod
from . import training as trainmod
from . import trecio
from .index import (
    DEFAULT_STOPWORDS,
    BM25Params,
    IndexFormatError,
    TokenizationConfig,
    build_index,
    bm25_search,
    load_index,
    paragraph_to_doc,
    save_index,
    tokenize,
)


def _tok_config(args) -> TokenizationConfig:
    if args.stopwords == "default":
        stop = DEFAULT_STOPWORDS
    elif args.stopwords == "none":
        stop = frozenset()
    else:
        stop = frozenset(
            line.strip().lower()
            for line in Path(args.stopwords).read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
    return TokenizationConfig(stemmer=args.stemmer, stopwords=stop)


def _scorer_handle(args) -> pipemod.ScorerHandle | None:
    if getattr(args, "scorer_pipe", None):
        return pipemod.ScorerHandle.pipe(args.scorer_pipe)
    if getattr(args, "scorer_tcp", None):
        return pipemod.ScorerHandle.tcp(args.scorer_tcp)
    return None


def _parse_cutoff(text: str) -> datetime.date:
    try:
        return datetime.date.fromisoformat(text)
    except ValueError:
        raise ValueError(f"cutoff must be YYYY-MM-DD, got {text!r}") from None


def _date_policy(args) -> corpusmod.DateFilterPolicy:
    return corpusmod.DateFilterPolicy(
        cutoff=_parse_cutoff(args.cutoff), keep_undated=args.keep_undated
    )


def cmd_ingest(args) -> int:
    stats = corpusmod.IngestStats()
    docs = corpusmod.parse_corpus(
        args.metadata,
        fulltext_dir=args.fulltext,
        stats=stats,
        id_column=args.id_column,
        title_column=args.title_column,
        abstract_column=args.abstract_column,
        date_column=args.date_column,
    )
    n = corpusmod.write_jsonl(docs, args.out)
    print(f"ingested {n} documents ({stats.skipped} rows skipped) -> {args.out}")
    return 0


def cmd_filter_corpus(args) -> int:
    stats = corpusmod.FilterStats()
    kept = corpusmod.filter_by_date(
        corpusmod.read_jsonl(args.input), _date_policy(args), stats
    )
    corpusmod.write_jsonl(kept, args.out)
    print(
        f"date filter (cutoff {args.cutoff}): kept {stats.kept}, "
        f"dropped {stats.dropped}, undated {stats.undated} -> {args.out}"
    )
    return 0


def cmd_index(args) -> int:
    cfg = _tok_config(args)
    index = build_index(corpusmod.read_jsonl(args.corpus), args.field, cfg)
    save_index(index, args.out)
    print(
        f"indexed {index.doc_count} {args.field} units, "
        f"{len(index.postings)} terms, avg length {index.avg_doc_len:.2f} -> {args.out}"
    )
    return 0


def _search_topics(index, topics, cfg, k, params, threads):
    def one(topic):
        terms = tokenize(topic.question, cfg)
        return topic.topic_id, bm25_search(index, terms, k, params)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, topics))
    else:
        results = [one(t) for t in topics]
    return dict(results)


def cmd_search(args) -> int:
    index = load_index(args.index)
    cfg = index.tok or TokenizationConfig()
    topics = trecio.parse_topics(args.topics, args.topics_format)
    params = BM25Params(k1=args.k1, b=args.b)
    hits_by_topic = _search_topics(index, topics, cfg, args.k, params, args.threads)
    run = trecio.Run(tag=args.tag)
    for topic in topics:
        hits = hits_by_topic[topic.topic_id]
        if index.field == "paragraph":
            run.entries[topic.topic_id] = paragraph_to_doc(hits)
        else:
            run.entries[topic.topic_id] = list(hits)
    trecio.write_run(run, args.out)
    print(f"searched {len(topics)} topics over {args.index} -> {args.out}")
    return 0


def cmd_filter_queries(args) -> int:
    exclusions = None if args.exclusions == "default" else args.exclusions
    lex = lexmod.load_lexicon(args.lexicon, exclusions)
    stats = lexmod.FilterQueryStats()
    kept = list(lexmod.filter_queries(lexmod.read_queries(args.queries), lex, stats))
    lexmod.emit_query_id_list(kept, args.out_ids)
    if args.out_kept:
        with Path(args.out_kept).open("w", encoding="utf-8") as fh:
            for q in kept:
                fh.write(f"{q.query_id}\t{q.text}\n")
    print(
        f"kept {stats.kept}/{stats.total} queries "
        f"(retention {stats.retention:.4f}) -> {args.out_ids}"
    )
    return 0


def cmd_make_training(args) -> int:
    med_ids = lexmod.read_query_id_list(args.accept_ids)
    queries = {q.query_id: q.text for q in lexmod.read_queries(args.queries)}
    passages = {q.query_id: q.text for q in lexmod.read_queries(args.passages)}
    stats = trainmod.SampleStats()
    triples = trainmod.sample_pairs(args.pairs, med_ids, passages, queries, stats)
    n = trainmod.write_triples(triples, args.out)
    print(f"wrote {n} training triples ({stats.skipped} rows skipped) -> {args.out}")

    if args.val_queries:
        if not args.val_qrels or not args.val_out:
            raise ValueError("--val-queries needs --val-qrels and --val-out")
        val_queries = list(lexmod.read_queries(args.val_queries))[: args.val_held_out]
        cfg = TokenizationConfig()
        passage_docs = (
            corpusmod.Document(doc_id=pid, title="", abstract=text)
            for pid, text in passages.items()
        )
        index = build_index(passage_docs, "abstract", cfg)
        bundle = trainmod.make_validation_set(
            val_queries,
            index,
            trecio.parse_qrels(args.val_qrels),
            passages,
            depth=args.val_depth,
            cfg=cfg,
        )
        trainmod.write_validation_bundle(bundle, args.val_out)
        print(f"wrote validation bundle for {len(val_queries)} queries -> {args.val_out}")
    return 0


def cmd_rerank(args) -> int:
    scorer = _scorer_handle(args)
    if scorer is None:
        raise ValueError("rerank needs --scorer-pipe or --scorer-tcp")
    run = trecio.read_run(args.run)
    topics = trecio.parse_topics(args.topics, args.topics_format)
    doc_map = corpusmod.load_doc_map(args.corpus)
    cfg = pipemod.RerankConfig(
        depth=args.depth,
        max_query_tokens=args.max_query_tokens,
        max_doc_tokens=args.max_doc_tokens,
    )
    out = pipemod.rerank(run, topics, doc_map, scorer, cfg)
    out.tag = args.tag or run.tag
    trecio.write_run(out, args.out)
    print(f"re-ranked top {cfg.depth} of {len(out.entries)} topics -> {args.out}")
    return 0


def cmd_fuse(args) -> int:
    runs = [trecio.read_run(path) for path in args.runs]
    fused = pipemod.rrf_fuse(
        runs, pipemod.FusionConfig(rrf_k=args.rrf_k), args.depth, tag=args.tag
    )
    trecio.write_run(fused, args.out)
    print(f"fused {len(runs)} runs over {len(fused.entries)} topics -> {args.out}")
    return 0


def _metric_list(spec: str) -> list[str]:
    names = [m.strip() for m in spec.split(",") if m.strip()]
    if not names:
        raise ValueError("no metrics requested")
    return names


def _evaluate_run(run, qrels, metric_names, condensed):
    """Returns (reports, row) where row maps column name -> mean."""
    reports: list[metricsmod.MetricReport] = []
    row: dict[str, float] = {}
    variants = []
    if condensed in ("no", "both"):
        variants.append(("", run))
    if condensed in ("yes", "both"):
        variants.append((" (judged)", metricsmod.condense(run, qrels)))
    for suffix, variant in variants:
        for name in metric_names:
            rep = metricsmod.compute_metric(name, variant, qrels)
            if suffix:
                rep = metricsmod.MetricReport(
                    rep.metric_name + ":judged", rep.per_topic, rep.mean
                )
            reports.append(rep)
            row[name + suffix] = rep.mean
    return reports, row


def _table_columns(metric_names, condensed):
    columns = []
    groups = []
    if condensed in ("no", "both"):
        columns += metric_names
        groups.append(("including unjudged", len(metric_names)))
    if condensed in ("yes", "both"):
        columns += [m + " (judged)" for m in metric_names]
        groups.append(("judged only", len(metric_names)))
    return columns, groups if condensed == "both" else None


def cmd_evaluate(args) -> int:
    run = trecio.read_run(args.run)
    qrels = trecio.parse_qrels(args.qrels)
    metric_names = _metric_list(args.metrics)
    reports, row = _evaluate_run(run, qrels, metric_names, args.condensed)
    columns, groups = _table_columns(metric_names, args.condensed)
    print(reportmod.summary_table([(run.tag, row)], columns, groups))
    if args.out_tsv:
        reportmod.write_metric_tsv(reports, args.out_tsv)
        print(f"per-topic values -> {args.out_tsv}")
    if args.figures:
        written = reportmod.render_metric_figures(reports, args.figures, stem=run.tag)
        print(f"{len(written)} figure(s) -> {args.figures}")
    return 0


def cmd_compare(args) -> int:
    candidate = trecio.read_run(args.candidate)
    baselines = [trecio.read_run(path) for path in args.baselines]
    qrels = trecio.parse_qrels(args.qrels)
    metric_names = _metric_list(args.metrics)

    def per_topic_tables(run):
        tables = {}
        variants = []
        if args.condensed in ("no", "both"):
            variants.append(("", run))
        if args.condensed in ("yes", "both"):
            variants.append((" (judged)", metricsmod.condense(run, qrels)))
        for suffix, variant in variants:
            for name in metric_names:
                rep = metricsmod.compute_metric(name, variant, qrels)
                tables[name + suffix] = rep.per_topic
        return tables

    cand_tables = per_topic_tables(candidate)
    columns, groups = _table_columns(metric_names, args.condensed)
    m = args.bonferroni_m or len(baselines) * len(columns)

    rows = [(candidate.tag, {c: _mean(v) for c, v in cand_tables.items()})]
    stars = {}
    for base in baselines:
        base_tables = per_topic_tables(base)
        row = {}
        for col in columns:
            row[col] = _mean(base_tables[col])
            p = metricsmod.paired_t_test(cand_tables[col], base_tables[col])
            if metricsmod.bonferroni(p, m) < args.alpha:
                stars[(base.tag, col)] = True
        rows.append((base.tag, row))
    print(reportmod.summary_table(rows, columns, groups, stars))
    print(
        f"* = differs from {candidate.tag} at p < {args.alpha} "
        f"(paired t-test, Bonferroni m={m})"
    )
    if args.figures:
        path = Path(args.figures) / "comparison.png"
        reportmod.render_comparison_figure(rows, columns, path)
        print(f"figure -> {path}")
    return 0


def _mean(per_topic: dict[str, float]) -> float:
    return sum(per_topic.values()) / len(per_topic)


def cmd_pipeline(args) -> int:
    docs = list(corpusmod.read_jsonl(args.corpus))
    topics = trecio.parse_topics(args.topics, args.topics_format)
    scorer = None if args.no_rerank else _scorer_handle(args)
    settings = pipemod.PipelineSettings(
        date_filter=None if args.no_date_filter else _date_policy(args),
        tokenization=_tok_config(args),
        bm25=BM25Params(k1=args.k1, b=args.b),
        first_stage_k=args.first_k,
        rerank=pipemod.RerankConfig(
            depth=args.depth,
            max_query_tokens=args.max_query_tokens,
            max_doc_tokens=args.max_doc_tokens,
        ),
        tag=args.tag,
    )
    run = pipemod.run_zero_shot_pipeline(docs, topics, scorer, settings)
    trecio.write_run(run, args.out)
    stage = "bm25 only" if scorer is None else f"re-ranked at depth {args.depth}"
    print(f"pipeline ({stage}): {len(topics)} topics over {len(docs)} docs -> {args.out}")
    return 0


def _add_tokenization_flags(p) -> None:
    p.add_argument("--stemmer", choices=["porter", "none"], default="porter")
    p.add_argument("--stopwords", default="default", metavar="FILE|default|none",
                   help="stopword list file, or 'default' (33 terms) or 'none'")


def _add_scorer_flags(p) -> None:
    p.add_argument("--scorer-pipe", metavar="CMD",
                   help="scorer command reading pairs on stdin")
    p.add_argument("--scorer-tcp", metavar="HOST:PORT",
                   help="scorer TCP endpoint")


def _add_rerank_flags(p) -> None:
    p.add_argument("--depth", type=int, default=100,
                   help="first-stage entries re-scored per topic")
    p.add_argument("--max-query-tokens", type=int, default=60,
                   help="whitespace-token cap for the question")
    p.add_argument("--max-doc-tokens", type=int, default=2000,
                   help="whitespace-token cap for title + abstract")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="medrank",
        description="Two-stage zero-shot retrieval over medical literature.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    def add(name, func, **kwargs):
        p = sub.add_parser(
            name, formatter_class=argparse.ArgumentDefaultsHelpFormatter, **kwargs
        )
        p.add_argument("--config", metavar="FILE",
                       help="key=value defaults mirroring flag names")
        p.add_argument("--threads", type=int, default=1,
                       help="worker parallelism cap")
        p.set_defaults(func=func)
        subparsers[name] = p
        return p

    p = add("ingest", cmd_ingest, help="CSV metadata (+ optional full text) -> JSONL")
    p.add_argument("--metadata", required=True)
    p.add_argument("--fulltext", help="directory of per-document JSON full text")
    p.add_argument("--out", required=True)
    p.add_argument("--id-column")
    p.add_argument("--title-column")
    p.add_argument("--abstract-column")
    p.add_argument("--date-column")

    p = add("filter-corpus", cmd_filter_corpus, help="drop documents before the cutoff")
    p.add_argument("--input", required=True, metavar="JSONL")
    p.add_argument("--out", required=True)
    p.add_argument("--cutoff", default="2020-01-01")
    p.add_argument("--keep-undated", action="store_true")

    p = add("index", cmd_index, help="build an inverted index over one field")
    p.add_argument("--corpus", required=True, metavar="JSONL")
    p.add_argument("--field", choices=["full_text", "abstract", "paragraph"],
                   default="full_text")
    p.add_argument("--out", required=True)
    _add_tokenization_flags(p)

    p = add("search", cmd_search, help="BM25 retrieval from a saved index")
    p.add_argument("--index", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--topics-format", choices=["tsv", "trec_xml"], default="tsv")
    p.add_argument("--k", type=int, default=1000,
                   help="results kept per topic")
    p.add_argument("--k1", type=float, default=0.9,
                   help="BM25 term-frequency saturation")
    p.add_argument("--b", type=float, default=0.4,
                   help="BM25 length normalization")
    p.add_argument("--tag", default="bm25")
    p.add_argument("--out", required=True)

    p = add("filter-queries", cmd_filter_queries,
            help="keep queries matching the lexicon")
    p.add_argument("--queries", required=True, metavar="TSV")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--exclusions", default="default",
                   metavar="FILE|default",
                   help="exclusion terms; 'default' uses the bundled list")
    p.add_argument("--out-ids", required=True)
    p.add_argument("--out-kept", help="also write the kept queries as TSV")

    p = add("make-training", cmd_make_training,
            help="emit training triples (and optionally a validation bundle)")
    p.add_argument("--pairs", required=True, metavar="TSV")
    p.add_argument("--accept-ids", required=True, metavar="FILE")
    p.add_argument("--queries", required=True, metavar="TSV")
    p.add_argument("--passages", required=True, metavar="TSV")
    p.add_argument("--out", required=True)
    p.add_argument("--val-queries", metavar="TSV")
    p.add_argument("--val-qrels")
    p.add_argument("--val-out")
    p.add_argument("--val-depth", type=int, default=20,
                   help="first-stage candidates per validation query")
    p.add_argument("--val-held-out", type=int, default=200,
                   help="held-out queries in the validation bundle")

    p = add("rerank", cmd_rerank, help="re-score a run with an external scorer")
    p.add_argument("--run", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--topics-format", choices=["tsv", "trec_xml"], default="tsv")
    p.add_argument("--corpus", required=True, metavar="JSONL")
    p.add_argument("--tag", default=None)
    p.add_argument("--out", required=True)
    _add_scorer_flags(p)
    _add_rerank_flags(p)

    p = add("fuse", cmd_fuse, help="reciprocal rank fusion of runs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--rrf-k", type=float, default=60.0,
                   help="reciprocal rank fusion constant")
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--tag", default="fused")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, help="metrics for a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metrics", default="ndcg@10,p@5,p@5f,j@10")
    p.add_argument("--condensed", choices=["no", "yes", "both"], default="both",
                   help="also/only score with unjudged entries removed")
    p.add_argument("--out-tsv", help="write per-topic metric TSV")
    p.add_argument("--figures", metavar="DIR", help="render per-metric figures")

    p = add("compare", cmd_compare,
            help="significance table: candidate run vs baselines")
    p.add_argument("--candidate", required=True)
    p.add_argument("--baselines", nargs="+", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metrics", default="ndcg@10,p@5,p@5f")
    p.add_argument("--condensed", choices=["no", "yes", "both"], default="both")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bonferroni-m", type=int, default=None,
                   help="correction family size (default: baselines x metrics)")
    p.add_argument("--figures", metavar="DIR")

    p = add("pipeline", cmd_pipeline,
            help="date filter + BM25 + re-rank in one invocation")
    p.add_argument("--corpus", required=True, metavar="JSONL")
    p.add_argument("--topics", required=True)
    p.add_argument("--topics-format", choices=["tsv", "trec_xml"], default="tsv")
    p.add_argument("--out", required=True)
    p.add_argument("--cutoff", default="2020-01-01")
    p.add_argument("--keep-undated", action="store_true")
    p.add_argument("--no-date-filter", action="store_true")
    p.add_argument("--no-rerank", action="store_true")
    p.add_argument("--first-k", type=int, default=1000,
                   help="first-stage results per topic")
    p.add_argument("--k1", type=float, default=0.9,
                   help="BM25 term-frequency saturation")
    p.add_argument("--b", type=float, default=0.4,
                   help="BM25 length normalization")
    p.add_argument("--tag", default="medrank")
    _add_scorer_flags(p)
    _add_rerank_flags(p)
    _add_tokenization_flags(p)

    return parser, subparsers


def _apply_config(args, parser, argv: list[str]) -> None:
    """Fill in values from a key=value file for flags not given on argv."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    actions = {a.dest: a for a in parser._actions}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        dest = key.replace("-", "_")
        value = value.strip()
        if dest not in actions or dest in ("config", "func", "command"):
            raise ValueError(f"{path}:{lineno}: unknown option '{key}'")
        flag = "--" + key.replace("_", "-")
        if flag in argv:
            continue  # explicit flag wins
        action = actions[dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            parsed = value.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("+", "*"):
            parsed = value.split()
        elif action.type is not None:
            parsed = action.type(value)
        else:
            parsed = value
        setattr(args, dest, parsed)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, subparsers[args.command], argv)
        return args.func(args)
    except (pipemod.ScorerProtocolError, pipemod.ScorerTransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        FileNotFoundError,
        ValueError,
        corpusmod.CorpusFormatError,
        trecio.TrecFormatError,
        IndexFormatError,
        metricsmod.EvalError,
        trainmod.TrainingDataError,
        pipemod.PipelineError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
