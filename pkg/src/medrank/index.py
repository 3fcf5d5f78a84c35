"""Tokenization, multi-field inverted indexing, and BM25 retrieval.

The analysis chain is: split on non-alphanumeric characters, lowercase,
drop stopwords, Porter-stem. Queries must be tokenized with the same
configuration the index was built with.
"""

from __future__ import annotations

import gzip
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import porter
from .corpus import Document

# the 33-term minimal English stopword list used by common lexical engines
DEFAULT_STOPWORDS = frozenset(
    """a an and are as at be but by for if in into is it no not of on or
    such that the their then there these they this to was will with""".split()
)

_TOKEN_SPLIT = re.compile(r"[^\W_]+", re.UNICODE)

FIELDS = ("full_text", "abstract", "paragraph")

# doc_ref is a plain doc_id for document-level fields and a
# (doc_id, paragraph_ordinal) pair for the paragraph field
DocRef = str | tuple[str, int]


class IndexFormatError(Exception):
    """Raised when a persisted index cannot be loaded."""


@dataclass(frozen=True)
class TokenizationConfig:
    lowercase: bool = True
    stemmer: str = "porter"  # "porter" or "none"
    stopwords: frozenset[str] = DEFAULT_STOPWORDS

    def __post_init__(self) -> None:
        if self.stemmer not in ("porter", "none"):
            raise ValueError(f"unknown stemmer: {self.stemmer}")


@dataclass(frozen=True)
class BM25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


def tokenize(text: str, cfg: TokenizationConfig | None = None) -> list[str]:
    """Analyze text into index terms.

    Stopword matching happens after lowercasing and before stemming.
    """
    if cfg is None:
        cfg = TokenizationConfig()
    tokens = _TOKEN_SPLIT.findall(text)
    if cfg.lowercase:
        tokens = [t.lower() for t in tokens]
    if cfg.stopwords:
        tokens = [t for t in tokens if t not in cfg.stopwords]
    if cfg.stemmer == "porter":
        tokens = [porter.stem(t) for t in tokens]
    return tokens


@dataclass
class InvertedIndex:
    field: str
    doc_count: int = 0
    avg_doc_len: float = 0.0
    postings: dict[str, list[tuple[DocRef, int]]] = field(default_factory=dict)
    doc_lens: dict[DocRef, int] = field(default_factory=dict)
    # analysis chain the index was built with; persisted so query-time
    # tokenization can never drift from the index
    tok: TokenizationConfig | None = None

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))


def _field_texts(doc: Document, fieldname: str) -> list[tuple[DocRef, str]]:
    if fieldname == "full_text":
        parts = [doc.title, doc.abstract] + list(doc.paragraphs)
        return [(doc.doc_id, " ".join(p for p in parts if p))]
    if fieldname == "abstract":
        parts = [doc.title, doc.abstract]
        return [(doc.doc_id, " ".join(p for p in parts if p))]
    if fieldname == "paragraph":
        return [((doc.doc_id, i), text) for i, text in enumerate(doc.paragraphs)]
    raise ValueError(f"unknown index field: {fieldname}")


def build_index(
    docs: Iterable[Document],
    fieldname: str = "full_text",
    cfg: TokenizationConfig | None = None,
) -> InvertedIndex:
    """Build an inverted index over one field of the corpus.

    Deterministic: two builds over the same corpus yield identical
    postings. An empty corpus yields a valid index with doc_count 0.
    """
    if cfg is None:
        cfg = TokenizationConfig()
    index = InvertedIndex(field=fieldname, tok=cfg)
    total_len = 0
    for doc in docs:
        for ref, text in _field_texts(doc, fieldname):
            terms = tokenize(text, cfg)
            index.doc_lens[ref] = len(terms)
            total_len += len(terms)
            for term, tf in sorted(Counter(terms).items()):
                index.postings.setdefault(term, []).append((ref, tf))
    index.doc_count = len(index.doc_lens)
    index.avg_doc_len = total_len / index.doc_count if index.doc_count else 0.0
    return index


def bm25_idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def bm25_search(
    index: InvertedIndex,
    query_terms: list[str],
    k: int,
    params: BM25Params | None = None,
) -> list[tuple[DocRef, float]]:
    """Top-k documents by BM25 over the query terms.

    A repeated query term contributes once per occurrence. Only documents
    matching at least one term are returned (zero scores never appear).
    Ties are broken by descending doc_ref.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if params is None:
        params = BM25Params()
    scores: dict[DocRef, float] = {}
    qtf = Counter(query_terms)
    for term, times in qtf.items():
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = bm25_idf(index.doc_count, len(plist))
        for ref, tf in plist:
            norm = params.k1 * (
                1.0 - params.b + params.b * index.doc_lens[ref] / index.avg_doc_len
            )
            contrib = idf * tf * (params.k1 + 1.0) / (tf + norm)
            scores[ref] = scores.get(ref, 0.0) + times * contrib
    ranked = sorted(scores.items(), key=lambda e: e[0], reverse=True)
    ranked.sort(key=lambda e: e[1], reverse=True)
    return ranked[:k]


def paragraph_to_doc(
    results: list[tuple[tuple[str, int], float]],
) -> list[tuple[str, float]]:
    """Collapse paragraph-level scores to one max score per document."""
    best: dict[str, float] = {}
    for (doc_id, _ordinal), score in results:
        if doc_id not in best or score > best[doc_id]:
            best[doc_id] = score
    collapsed = sorted(best.items(), key=lambda e: e[0], reverse=True)
    collapsed.sort(key=lambda e: e[1], reverse=True)
    return collapsed


INDEX_VERSION = 1


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist as a one-byte version marker followed by gzipped JSON."""
    paragraph_refs = index.field == "paragraph"

    def enc(ref: DocRef):
        return list(ref) if paragraph_refs else ref

    payload = {
        "field": index.field,
        "doc_count": index.doc_count,
        "avg_doc_len": index.avg_doc_len,
        "postings": {
            term: [[enc(ref), tf] for ref, tf in plist]
            for term, plist in index.postings.items()
        },
        "doc_lens": [[enc(ref), n] for ref, n in index.doc_lens.items()],
    }
    if index.tok is not None:
        payload["tok"] = {
            "lowercase": index.tok.lowercase,
            "stemmer": index.tok.stemmer,
            "stopwords": sorted(index.tok.stopwords),
        }
    blob = gzip.compress(json.dumps(payload).encode("utf-8"))
    Path(path).write_bytes(bytes([INDEX_VERSION]) + blob)


def load_index(path: str | Path) -> InvertedIndex:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"index file not found: {path}")
    raw = path.read_bytes()
    if not raw or raw[0] != INDEX_VERSION:
        found = raw[0] if raw else "empty file"
        raise IndexFormatError(
            f"{path}: unsupported index version {found!r} (expected {INDEX_VERSION})"
        )
    payload = json.loads(gzip.decompress(raw[1:]).decode("utf-8"))
    paragraph_refs = payload["field"] == "paragraph"

    def dec(ref) -> DocRef:
        return (ref[0], ref[1]) if paragraph_refs else ref

    tok = None
    if "tok" in payload:
        tok = TokenizationConfig(
            lowercase=payload["tok"]["lowercase"],
            stemmer=payload["tok"]["stemmer"],
            stopwords=frozenset(payload["tok"]["stopwords"]),
        )
    return InvertedIndex(
        field=payload["field"],
        doc_count=payload["doc_count"],
        avg_doc_len=payload["avg_doc_len"],
        postings={
            term: [(dec(ref), tf) for ref, tf in plist]
            for term, plist in payload["postings"].items()
        },
        doc_lens={dec(ref): n for ref, n in payload["doc_lens"]},
        tok=tok,
    )
