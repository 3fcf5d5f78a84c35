"""Corpus ingestion, canonical JSONL interchange, and the publication-date filter."""

from __future__ import annotations

import csv
import datetime
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)


class CorpusFormatError(Exception):
    """Raised when an input file cannot be interpreted as a corpus."""


@dataclass
class Document:
    doc_id: str
    title: str = ""
    abstract: str = ""
    paragraphs: list[str] = field(default_factory=list)
    # normalized to "YYYY-MM-DD", "YYYY", or None (absent)
    publish_date: str | None = None
    extra: dict[str, str] = field(default_factory=dict)

    def full_date(self) -> datetime.date | None:
        if self.publish_date is not None and len(self.publish_date) == 10:
            return datetime.date.fromisoformat(self.publish_date)
        return None

    def year(self) -> int | None:
        if self.publish_date is None:
            return None
        return int(self.publish_date[:4])


@dataclass
class DateFilterPolicy:
    cutoff: datetime.date = datetime.date(2020, 1, 1)
    keep_undated: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.cutoff, datetime.date):
            raise ValueError("cutoff must be a calendar date")


@dataclass
class IngestStats:
    rows: int = 0
    parsed: int = 0
    skipped: int = 0


@dataclass
class FilterStats:
    kept: int = 0
    dropped: int = 0
    undated: int = 0


def parse_date(raw: str | None) -> str | None:
    """Normalize a raw date cell: full ISO date, bare year, or absent."""
    if raw is None:
        return None
    raw = raw.strip()
    if len(raw) == 10:
        try:
            return datetime.date.fromisoformat(raw).isoformat()
        except ValueError:
            return None
    if len(raw) == 4 and raw.isdigit():
        return raw
    return None


_ID_COLUMNS = ("cord_uid", "doc_id", "id", "docno", "uid")
_DATE_COLUMNS = ("publish_time", "publish_date", "date")


def _pick_column(header: list[str], wanted: str, candidates: tuple[str, ...],
                 override: str | None) -> str:
    if override is not None:
        if override not in header:
            raise CorpusFormatError(f"metadata file has no column '{override}'")
        return override
    for name in candidates:
        if name in header:
            return name
    raise CorpusFormatError(
        f"metadata file is missing a required '{wanted}' column "
        f"(looked for any of: {', '.join(candidates)})"
    )


def _load_fulltext(fulltext_dir: Path, doc_id: str) -> list[str]:
    path = fulltext_dir / f"{doc_id}.json"
    if not path.exists():
        return []
    with path.open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        if "paragraphs" in data:
            return [str(p) for p in data["paragraphs"]]
        if "body_text" in data:
            return [str(block.get("text", "")) for block in data["body_text"]]
    return []


def parse_corpus(
    metadata_file: str | Path,
    fulltext_dir: str | Path | None = None,
    stats: IngestStats | None = None,
    id_column: str | None = None,
    title_column: str | None = None,
    abstract_column: str | None = None,
    date_column: str | None = None,
) -> Iterator[Document]:
    """Stream Documents out of a CSV metadata file, in file order.

    Rows with an empty or duplicate id are skipped and counted in
    ``stats``. A missing file or missing required header column is fatal.
    """
    metadata_file = Path(metadata_file)
    if not metadata_file.exists():
        raise FileNotFoundError(f"metadata file not found: {metadata_file}")
    ft_dir = Path(fulltext_dir) if fulltext_dir is not None else None
    if ft_dir is not None and not ft_dir.is_dir():
        raise FileNotFoundError(f"full-text directory not found: {ft_dir}")
    if stats is None:
        stats = IngestStats()

    with metadata_file.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        id_col = _pick_column(header, "id", _ID_COLUMNS, id_column)
        title_col = _pick_column(header, "title", ("title",), title_column)
        abstract_col = _pick_column(header, "abstract", ("abstract",), abstract_column)
        date_col = _pick_column(header, "publish date", _DATE_COLUMNS, date_column)

        seen: set[str] = set()
        for row in reader:
            stats.rows += 1
            doc_id = (row.get(id_col) or "").strip()
            if not doc_id or doc_id in seen:
                stats.skipped += 1
                continue
            seen.add(doc_id)
            paragraphs = _load_fulltext(ft_dir, doc_id) if ft_dir is not None else []
            known = {id_col, title_col, abstract_col, date_col}
            extra = {k: v for k, v in row.items()
                     if k not in known and v not in (None, "")}
            stats.parsed += 1
            yield Document(
                doc_id=doc_id,
                title=(row.get(title_col) or "").strip(),
                abstract=(row.get(abstract_col) or "").strip(),
                paragraphs=paragraphs,
                publish_date=parse_date(row.get(date_col)),
                extra=extra,
            )


def filter_by_date(
    docs: Iterable[Document],
    policy: DateFilterPolicy,
    stats: FilterStats | None = None,
) -> Iterator[Document]:
    """Keep documents published on/after the cutoff, preserving order.

    Full dates compare as dates; year-only dates compare by year against
    the cutoff's year; undated documents are kept only with
    ``keep_undated``. ``stats.kept + stats.dropped`` equals the input
    count; ``undated`` counts separately.
    """
    if stats is None:
        stats = FilterStats()
    for doc in docs:
        if doc.publish_date is None:
            stats.undated += 1
            keep = policy.keep_undated
        else:
            full = doc.full_date()
            if full is not None:
                keep = full >= policy.cutoff
            else:
                keep = doc.year() >= policy.cutoff.year
        if keep:
            stats.kept += 1
            yield doc
        else:
            stats.dropped += 1


_JSONL_FIELDS = ("doc_id", "title", "abstract", "paragraphs", "publish_date")


def write_jsonl(docs: Iterable[Document], path: str | Path) -> int:
    """Write documents as canonical line-delimited JSON. Returns the count."""
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            record = {
                "doc_id": doc.doc_id,
                "title": doc.title,
                "abstract": doc.abstract,
                "paragraphs": doc.paragraphs,
                "publish_date": doc.publish_date,
            }
            if doc.extra:
                record["extra"] = doc.extra
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[Document]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            missing = [f for f in _JSONL_FIELDS if f not in record]
            if missing:
                raise CorpusFormatError(
                    f"{path}:{lineno}: missing fields: {', '.join(missing)}"
                )
            yield Document(
                doc_id=record["doc_id"],
                title=record["title"],
                abstract=record["abstract"],
                paragraphs=list(record["paragraphs"]),
                publish_date=record["publish_date"],
                extra=dict(record.get("extra", {})),
            )


def load_doc_map(path: str | Path) -> dict[str, Document]:
    """Read a JSONL corpus into a doc_id -> Document lookup."""
    return {doc.doc_id: doc for doc in read_jsonl(path)}
