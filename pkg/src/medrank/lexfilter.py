"""Lexicon-based filtering of training queries down to the medical domain.

A query is kept when some lexicon phrase occurs as a contiguous token
sequence in it. Matching is on surface forms: lowercased, split on
non-alphanumerics, no stemming and no stopword removal. Single-term
exclusions knock ambiguous entries out of the lexicon; they never touch
tokens inside multi-token phrases.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

DEFAULT_EXCLUSIONS_FILE = Path(__file__).parent / "data" / "exclusions.txt"

_TOKEN_SPLIT = re.compile(r"[^\W_]+", re.UNICODE)


def surface_tokens(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN_SPLIT.findall(text)]


@dataclass(frozen=True)
class Lexicon:
    phrases: frozenset[tuple[str, ...]]
    exclusions: frozenset[str]

    def effective_phrases(self) -> frozenset[tuple[str, ...]]:
        return frozenset(
            p for p in self.phrases
            if not (len(p) == 1 and p[0] in self.exclusions)
        )


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    text: str


@dataclass
class FilterQueryStats:
    total: int = 0
    kept: int = 0

    @property
    def retention(self) -> float:
        return self.kept / self.total if self.total else 0.0


def load_lexicon(
    file: str | Path,
    exclusions_file: str | Path | None = None,
) -> Lexicon:
    """Load one phrase per line; ``exclusions_file=None`` uses the bundled
    default exclusion terms. Duplicate lines collapse."""
    file = Path(file)
    if not file.exists():
        raise FileNotFoundError(f"lexicon file not found: {file}")
    phrases = set()
    with file.open("r", encoding="utf-8") as fh:
        for line in fh:
            tokens = tuple(surface_tokens(line))
            if tokens:
                phrases.add(tokens)
    if not phrases:
        log.warning("lexicon file %s is empty", file)
    if exclusions_file is None:
        exclusions_file = DEFAULT_EXCLUSIONS_FILE
    exclusions = load_exclusions(exclusions_file)
    return Lexicon(phrases=frozenset(phrases), exclusions=exclusions)


def load_exclusions(file: str | Path) -> frozenset[str]:
    file = Path(file)
    if not file.exists():
        raise FileNotFoundError(f"exclusions file not found: {file}")
    terms = set()
    with file.open("r", encoding="utf-8") as fh:
        for line in fh:
            term = line.strip().lower()
            if term:
                terms.add(term)
    return frozenset(terms)


def matches(query: QueryRecord, lex: Lexicon) -> bool:
    """True iff some effective phrase is a contiguous subsequence of the
    query's surface tokens."""
    tokens = surface_tokens(query.text)
    if not tokens:
        return False
    phrases = lex.effective_phrases()
    if not phrases:
        return False
    by_first: dict[str, list[tuple[str, ...]]] = {}
    for phrase in phrases:
        by_first.setdefault(phrase[0], []).append(phrase)
    for i, tok in enumerate(tokens):
        for phrase in by_first.get(tok, ()):
            if tuple(tokens[i:i + len(phrase)]) == phrase:
                return True
    return False


def filter_queries(
    queries: Iterable[QueryRecord],
    lex: Lexicon,
    stats: FilterQueryStats | None = None,
) -> Iterator[QueryRecord]:
    """Stream the matching queries in input order."""
    if stats is None:
        stats = FilterQueryStats()
    for query in queries:
        stats.total += 1
        if matches(query, lex):
            stats.kept += 1
            yield query


def read_queries(path: str | Path) -> Iterator[QueryRecord]:
    """Read a ``query_id<TAB>text`` TSV."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"queries file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected query_id<TAB>text")
            yield QueryRecord(parts[0].strip(), parts[1].strip())


def _id_sort_key(query_id: str):
    # numeric ids sort numerically, anything else lexicographically after
    if query_id.isdigit():
        return (0, len(query_id), query_id)
    return (1, 0, query_id)


def emit_query_id_list(kept: Iterable[QueryRecord], path: str | Path) -> None:
    """Write kept query ids one per line, sorted ascending, byte-stable."""
    ids = sorted({q.query_id for q in kept}, key=_id_sort_key)
    Path(path).write_text("".join(i + "\n" for i in ids), encoding="utf-8")


def read_query_id_list(path: str | Path) -> set[str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"query id list not found: {path}")
    return {
        line.strip() for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    }
