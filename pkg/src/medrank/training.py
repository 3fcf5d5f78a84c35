"""Training-data plumbing and optimization contracts for the scorer:
triple sampling restricted to a query-id subset, the pairwise loss and
its gradient, early stopping, and the validation bundle.

The scorer lives behind a process boundary; everything it needs is
written to plain files (training TSV, candidates run, qrels, id->text
TSVs), so it never has to know about corpus formats.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .index import InvertedIndex, BM25Params, TokenizationConfig, bm25_search, tokenize
from .lexfilter import QueryRecord
from .trecio import QrelSet, Run, write_run

log = logging.getLogger(__name__)


class TrainingDataError(Exception):
    pass


@dataclass(frozen=True)
class TrainTriple:
    query_id: str
    query_text: str
    pos_text: str
    neg_text: str

    def __post_init__(self) -> None:
        if self.pos_text == self.neg_text:
            raise TrainingDataError(
                f"query {self.query_id}: positive and negative texts are identical"
            )


@dataclass(frozen=True)
class ValidationConfig:
    held_out_queries: int = 200
    rerank_depth: int = 20
    samples_per_validation: int = 512
    patience: int = 20
    metric: str = "mrr@10"

    def __post_init__(self) -> None:
        for name in ("held_out_queries", "rerank_depth",
                     "samples_per_validation", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class SampleStats:
    rows: int = 0
    yielded: int = 0
    skipped: int = 0


def sample_pairs(
    pair_list: str | Path,
    med_ids: set[str],
    passages: Mapping[str, str],
    queries: Mapping[str, str],
    stats: SampleStats | None = None,
) -> Iterator[TrainTriple]:
    """Stream triples from a ``query_id<TAB>pos_id<TAB>neg_id`` list in
    file order, skipping rows whose query id is not in ``med_ids``."""
    pair_list = Path(pair_list)
    if not pair_list.exists():
        raise FileNotFoundError(f"pair list not found: {pair_list}")
    if stats is None:
        stats = SampleStats()
    with pair_list.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TrainingDataError(
                    f"{pair_list}:{lineno}: expected 3 tab-separated ids"
                )
            stats.rows += 1
            query_id, pos_id, neg_id = (p.strip() for p in parts)
            if query_id not in med_ids:
                stats.skipped += 1
                continue
            if query_id not in queries:
                raise TrainingDataError(f"unresolvable query id: {query_id}")
            for pid in (pos_id, neg_id):
                if pid not in passages:
                    raise TrainingDataError(f"unresolvable passage id: {pid}")
            stats.yielded += 1
            yield TrainTriple(query_id, queries[query_id],
                              passages[pos_id], passages[neg_id])


def write_triples(triples: Iterable[TrainTriple], path: str | Path) -> int:
    """Emit ``query<TAB>pos_text<TAB>neg_text`` lines; tabs and newlines
    inside texts are flattened to spaces."""
    def clean(text: str) -> str:
        return " ".join(text.split())

    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(f"{clean(t.query_text)}\t{clean(t.pos_text)}\t{clean(t.neg_text)}\n")
            n += 1
    return n


def pairwise_loss(s_pos: float, s_neg: float) -> float:
    """Pairwise cross-entropy: -log softmax of the positive score.

    Computed as softplus(s_neg - s_pos), which is stable for any margin.
    """
    for s in (s_pos, s_neg):
        if not math.isfinite(s):
            raise ValueError(f"non-finite score: {s}")
    x = s_neg - s_pos
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def loss_gradient(s_pos: float, s_neg: float) -> tuple[float, float]:
    """Analytic gradient of pairwise_loss wrt (s_pos, s_neg)."""
    for s in (s_pos, s_neg):
        if not math.isfinite(s):
            raise ValueError(f"non-finite score: {s}")
    x = s_neg - s_pos
    if x >= 0:
        sig = 1.0 / (1.0 + math.exp(-x))
    else:
        e = math.exp(x)
        sig = e / (1.0 + e)
    return (-sig, sig)


class EarlyStopper:
    """Stop after ``patience`` consecutive validations that do not improve
    on the best score; the best index is the earliest argmax."""

    def __init__(self, patience: int = 20) -> None:
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best_score: float | None = None
        self.best_index: int | None = None
        self.bad_streak = 0
        self.steps = 0

    def update(self, score: float) -> bool:
        """Feed one validation score; returns True when training should stop."""
        index = self.steps
        self.steps += 1
        if self.best_score is None or score > self.best_score:
            self.best_score = score
            self.best_index = index
            self.bad_streak = 0
        else:
            self.bad_streak += 1
        return self.bad_streak >= self.patience


def evaluate_stopping(
    scores: Iterable[float], patience: int = 20
) -> tuple[int | None, list[bool]]:
    """Offline view of EarlyStopper: (best_index, stop flag per step)."""
    stopper = EarlyStopper(patience)
    flags = [stopper.update(s) for s in scores]
    return stopper.best_index, flags


@dataclass
class ValidationBundle:
    candidates: Run
    qrels: QrelSet
    queries: list[QueryRecord]
    passages: dict[str, str]


def make_validation_set(
    queries: list[QueryRecord],
    index: InvertedIndex,
    qrels: QrelSet,
    passages: Mapping[str, str],
    depth: int = 20,
    cfg: TokenizationConfig | None = None,
    params: BM25Params | None = None,
) -> ValidationBundle:
    """Per held-out query, the BM25 top-``depth`` candidates plus qrels.

    The scorer's validation metric is computed over these candidates; a
    query whose relevant passage misses the candidate list can never
    contribute, regardless of the scorer.
    """
    if cfg is None:
        cfg = TokenizationConfig()
    run = Run(tag="validation-bm25")
    needed: set[str] = set()
    for query in queries:
        hits = bm25_search(index, tokenize(query.text, cfg), depth, params)
        run.entries[query.query_id] = [(ref, score) for ref, score in hits]
        needed.update(ref for ref, _ in hits)
    bundle_passages = {pid: passages[pid] for pid in sorted(needed)}
    return ValidationBundle(run, qrels, list(queries), bundle_passages)


def write_validation_bundle(bundle: ValidationBundle, out_dir: str | Path) -> None:
    """Lay the bundle out as four plain files the scorer can consume."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run(bundle.candidates, out_dir / "candidates.run")
    qrel_lines = []
    for topic_id in sorted(bundle.qrels.judgments):
        for doc_id, grade in sorted(bundle.qrels.judgments[topic_id].items()):
            qrel_lines.append(f"{topic_id} 0 {doc_id} {grade}")
    (out_dir / "qrels.txt").write_text(
        "".join(line + "\n" for line in qrel_lines), encoding="utf-8"
    )
    with (out_dir / "queries.tsv").open("w", encoding="utf-8") as fh:
        for q in bundle.queries:
            fh.write(f"{q.query_id}\t{' '.join(q.text.split())}\n")
    with (out_dir / "passages.tsv").open("w", encoding="utf-8") as fh:
        for pid, text in bundle.passages.items():
            fh.write(f"{pid}\t{' '.join(text.split())}\n")
