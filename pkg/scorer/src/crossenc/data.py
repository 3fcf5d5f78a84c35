"""File-format plumbing: the training pairs TSV and the validation bundle
(candidates run file, qrels, and id->text TSVs) emitted by the retrieval
side. These files are the entire contract; nothing here knows about
corpora or indexes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Pair:
    query: str
    pos: str
    neg: str


def read_pairs(path: str | Path) -> list[Pair]:
    """query<TAB>pos_text<TAB>neg_text, one training pair per line."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"pairs file not found: {path}")
    pairs = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            pairs.append(Pair(*parts))
    if not pairs:
        raise ValueError(f"{path}: no training pairs")
    return pairs


def _read_tsv_map(path: Path) -> dict[str, str]:
    mapping = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected id<TAB>text")
            mapping[parts[0]] = parts[1]
    return mapping


@dataclass
class ValidationBundle:
    # query_id -> candidate doc ids in first-stage order
    candidates: dict[str, list[str]]
    # query_id -> doc_id -> grade
    qrels: dict[str, dict[str, int]]
    queries: dict[str, str]
    passages: dict[str, str]


def read_validation_bundle(bundle_dir: str | Path) -> ValidationBundle:
    bundle_dir = Path(bundle_dir)
    run_file = bundle_dir / "candidates.run"
    if not run_file.exists():
        raise FileNotFoundError(f"validation bundle incomplete: {run_file} missing")
    candidates: dict[str, list[str]] = {}
    with run_file.open("r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 6:
                continue
            candidates.setdefault(parts[0], []).append(parts[2])
    qrels: dict[str, dict[str, int]] = {}
    with (bundle_dir / "qrels.txt").open("r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 4:
                continue
            qrels.setdefault(parts[0], {})[parts[2]] = int(parts[3])
    return ValidationBundle(
        candidates=candidates,
        qrels=qrels,
        queries=_read_tsv_map(bundle_dir / "queries.tsv"),
        passages=_read_tsv_map(bundle_dir / "passages.tsv"),
    )


def mrr_at_10(ranked_ids: list[str], judged: dict[str, int]) -> float:
    for rank, doc_id in enumerate(ranked_ids[:10], start=1):
        if judged.get(doc_id, 0) >= 1:
            return 1.0 / rank
    return 0.0
