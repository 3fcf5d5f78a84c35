"""Two-stage ranking orchestration: first-stage retrieval, external
re-ranking over a line-oriented wire protocol, and reciprocal rank fusion.

Wire protocol (UTF-8, one record per line):
    request:   pair_id<TAB>query_text<TAB>doc_text
    response:  pair_id<TAB>score
Pipe transport sends one batch per process: requests end when stdin
closes, and the scorer closes its output stream when done. TCP transport
frames each batch with a terminator line ``##END##`` in both directions,
so one connection can serve many batches.
"""

from __future__ import annotations

import logging
import math
import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass
from typing import Callable, Iterable

from .corpus import DateFilterPolicy, Document, filter_by_date
from .index import BM25Params, TokenizationConfig, build_index, bm25_search, tokenize
from .trecio import Run, Topic, sort_scored

log = logging.getLogger(__name__)

BATCH_TERMINATOR = "##END##"


class PipelineError(Exception):
    pass


class ScorerProtocolError(PipelineError):
    """The scorer broke the wire protocol (bad ids, counts, or scores)."""


class ScorerTransportError(PipelineError):
    """The scorer process or connection failed mid-batch."""


@dataclass(frozen=True)
class RerankConfig:
    depth: int = 100
    max_query_tokens: int = 60
    max_doc_tokens: int = 2000
    doc_text_source: str = "title_plus_abstract"

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.max_query_tokens < 1 or self.max_doc_tokens < 1:
            raise ValueError("truncation limits must be positive")


@dataclass(frozen=True)
class FusionConfig:
    rrf_k: float = 60.0

    def __post_init__(self) -> None:
        if self.rrf_k <= 0:
            raise ValueError("rrf_k must be positive")


@dataclass(frozen=True)
class ScorerHandle:
    transport: str  # "pipe" or "tcp"
    identity: str   # command line, or host:port

    def __post_init__(self) -> None:
        if self.transport not in ("pipe", "tcp"):
            raise ValueError(f"unknown transport: {self.transport}")

    @classmethod
    def pipe(cls, command: str) -> "ScorerHandle":
        return cls("pipe", command)

    @classmethod
    def tcp(cls, address: str) -> "ScorerHandle":
        host, _, port = address.partition(":")
        if not host or not port.isdigit():
            raise ValueError(f"tcp address must be host:port, got {address!r}")
        return cls("tcp", address)


def truncate_words(text: str, limit: int) -> str:
    """First ``limit`` whitespace tokens, single-space joined.

    Also normalizes tabs and newlines away, keeping texts wire-safe.
    """
    return " ".join(text.split()[:limit])


def _validate_pairs(pairs: list[tuple[str, str, str]]) -> None:
    seen: set[str] = set()
    for pair_id, query, doc in pairs:
        if pair_id in seen:
            raise ScorerProtocolError(f"duplicate pair_id in request: {pair_id}")
        seen.add(pair_id)
        for label, text in (("pair_id", pair_id), ("query", query), ("doc", doc)):
            if "\t" in text or "\n" in text or "\r" in text:
                raise ScorerProtocolError(
                    f"{label} for pair {pair_id} contains a tab or newline; "
                    "sanitize with spaces first"
                )


def _parse_responses(
    lines: Iterable[str], expected: dict[str, int]
) -> list[tuple[str, float]]:
    """Match response lines to requests by pair_id; order-independent."""
    scores: dict[str, float] = {}
    for line in lines:
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ScorerProtocolError(f"malformed response line: {line!r}")
        pair_id, score_str = parts
        if pair_id not in expected:
            raise ScorerProtocolError(f"response for unknown pair_id: {pair_id}")
        if pair_id in scores:
            raise ScorerProtocolError(f"duplicate response for pair_id: {pair_id}")
        try:
            score = float(score_str)
        except ValueError:
            raise ScorerProtocolError(
                f"pair {pair_id}: unparseable score {score_str!r}"
            ) from None
        if not math.isfinite(score):
            raise ScorerProtocolError(f"pair {pair_id}: non-finite score {score}")
        scores[pair_id] = score
    missing = [p for p in expected if p not in scores]
    if missing:
        raise ScorerProtocolError(
            f"scorer answered {len(scores)}/{len(expected)} pairs; "
            f"missing e.g. {missing[:3]}"
        )
    ordered = sorted(expected, key=expected.get)
    return [(pair_id, scores[pair_id]) for pair_id in ordered]


def _score_pairs_pipe(command: str, requests: list[str],
                      expected: dict[str, int]) -> list[tuple[str, float]]:
    try:
        proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )
    except OSError as exc:
        raise ScorerTransportError(f"cannot start scorer {command!r}: {exc}") from exc

    def feed() -> None:
        try:
            for line in requests:
                proc.stdin.write(line + "\n")
            proc.stdin.close()
        except BrokenPipeError:
            pass

    writer = threading.Thread(target=feed, daemon=True)
    writer.start()
    lines = proc.stdout.readlines()
    writer.join()
    returncode = proc.wait()
    if returncode != 0:
        raise ScorerTransportError(f"scorer exited with status {returncode}")
    return _parse_responses(lines, expected)


def _score_pairs_tcp(address: str, requests: list[str],
                     expected: dict[str, int]) -> list[tuple[str, float]]:
    host, _, port = address.partition(":")
    try:
        conn = socket.create_connection((host, int(port)))
    except OSError as exc:
        raise ScorerTransportError(f"cannot connect to {address}: {exc}") from exc
    with conn:
        reader = conn.makefile("r", encoding="utf-8", newline="\n")
        writer = conn.makefile("w", encoding="utf-8", newline="\n")

        def feed() -> None:
            try:
                for line in requests:
                    writer.write(line + "\n")
                writer.write(BATCH_TERMINATOR + "\n")
                writer.flush()
            except OSError:
                pass

        feeder = threading.Thread(target=feed, daemon=True)
        feeder.start()
        lines = []
        terminated = False
        for line in reader:
            if line.rstrip("\n") == BATCH_TERMINATOR:
                terminated = True
                break
            lines.append(line)
        feeder.join()
        if not terminated:
            raise ScorerTransportError(
                f"scorer at {address} closed the connection mid-batch"
            )
    return _parse_responses(lines, expected)


def score_pairs(
    scorer: ScorerHandle, pairs: list[tuple[str, str, str]]
) -> list[tuple[str, float]]:
    """Score (query, doc) pairs through the wire protocol.

    Returns (pair_id, score) in request order. Texts must already be free
    of tabs and newlines; pair ids must be unique.
    """
    if not pairs:
        return []
    _validate_pairs(pairs)
    expected = {pair_id: i for i, (pair_id, _, _) in enumerate(pairs)}
    requests = [f"{pid}\t{query}\t{doc}" for pid, query, doc in pairs]
    if scorer.transport == "pipe":
        return _score_pairs_pipe(scorer.identity, requests, expected)
    return _score_pairs_tcp(scorer.identity, requests, expected)


def rerank(
    run: Run,
    topics: list[Topic],
    doc_lookup: dict[str, Document] | Callable[[str], Document],
    scorer: ScorerHandle,
    cfg: RerankConfig | None = None,
) -> Run:
    """Re-score the top ``depth`` entries per topic with the external scorer.

    The re-ranked block is sorted by scorer score (doc_id descending on
    ties); deeper entries keep their relative order and are appended with
    scores strictly below the block minimum. Pair ids on the wire are
    ``topic_id:doc_id``.
    """
    if cfg is None:
        cfg = RerankConfig()
    if callable(doc_lookup):
        lookup = doc_lookup
    else:
        lookup = doc_lookup.__getitem__
    questions = {t.topic_id: t.question for t in topics}

    pairs = []
    for topic_id in sorted(run.entries):
        if topic_id not in questions:
            raise PipelineError(f"topic {topic_id}: no question available")
        query = truncate_words(questions[topic_id], cfg.max_query_tokens)
        for doc_id, _ in run.entries[topic_id][:cfg.depth]:
            try:
                doc = lookup(doc_id)
            except KeyError:
                raise PipelineError(
                    f"topic {topic_id}: unresolvable doc_id {doc_id}"
                ) from None
            doc_text = truncate_words(
                f"{doc.title}. {doc.abstract}", cfg.max_doc_tokens
            )
            pairs.append((f"{topic_id}:{doc_id}", query, doc_text))

    scored = dict(score_pairs(scorer, pairs))

    out = Run(tag=run.tag)
    for topic_id, items in run.entries.items():
        block = items[:cfg.depth]
        tail = items[cfg.depth:]
        reranked = sort_scored(
            (doc_id, scored[f"{topic_id}:{doc_id}"]) for doc_id, _ in block
        )
        entries = list(reranked)
        if tail:
            floor = min(score for _, score in reranked)
            entries.extend(
                (doc_id, floor - (j + 1)) for j, (doc_id, _) in enumerate(tail)
            )
        out.entries[topic_id] = entries
    return out


def rrf_fuse(
    runs: list[Run],
    cfg: FusionConfig | None = None,
    out_depth: int = 1000,
    tag: str = "fused",
) -> Run:
    """Reciprocal rank fusion: RRF(d) = sum over runs of 1/(k + rank(d)).

    Fuses the intersection of topic sets, warning about the difference.
    """
    if cfg is None:
        cfg = FusionConfig()
    if len(runs) < 2:
        raise PipelineError("fusion needs at least 2 runs")
    if out_depth < 1:
        raise PipelineError("out_depth must be >= 1")
    common = set(runs[0].entries)
    union = set(runs[0].entries)
    for run in runs[1:]:
        common &= set(run.entries)
        union |= set(run.entries)
    if union - common:
        log.warning(
            "fusing intersection of topics; dropped: %s", sorted(union - common)
        )
    fused = Run(tag=tag)
    for topic_id in sorted(common):
        contributions: dict[str, list[float]] = {}
        for run in runs:
            for rank, (doc_id, _) in enumerate(run.entries[topic_id], start=1):
                contributions.setdefault(doc_id, []).append(1.0 / (cfg.rrf_k + rank))
        # fsum is correctly rounded, so scores cannot depend on run order
        scores = [(doc_id, math.fsum(terms)) for doc_id, terms in contributions.items()]
        fused.entries[topic_id] = sort_scored(scores)[:out_depth]
    return fused


@dataclass
class PipelineSettings:
    date_filter: DateFilterPolicy | None = DateFilterPolicy()
    tokenization: TokenizationConfig = TokenizationConfig()
    bm25: BM25Params = BM25Params()
    first_stage_k: int = 1000
    rerank: RerankConfig = RerankConfig()
    tag: str = "medrank"


def run_zero_shot_pipeline(
    docs: Iterable[Document],
    topics: list[Topic],
    scorer: ScorerHandle | None = None,
    settings: PipelineSettings | None = None,
) -> Run:
    """Date filter, then full-text BM25, then abstract re-ranking.

    Equivalent to chaining the stages by hand. A ``date_filter`` of None
    skips that stage; with no scorer the output is the plain first-stage
    run. Topics whose question matches nothing get an empty result list.
    """
    if settings is None:
        settings = PipelineSettings()
    docs = list(docs)
    if settings.date_filter is not None:
        docs = list(filter_by_date(docs, settings.date_filter))
    index = build_index(docs, "full_text", settings.tokenization)
    run = Run(tag=settings.tag)
    for topic in topics:
        terms = tokenize(topic.question, settings.tokenization)
        hits = bm25_search(index, terms, settings.first_stage_k, settings.bm25)
        run.entries[topic.topic_id] = [(ref, score) for ref, score in hits]
    if scorer is None:
        return run
    doc_map = {doc.doc_id: doc for doc in docs}
    return rerank(run, topics, doc_map, scorer, settings.rerank)
