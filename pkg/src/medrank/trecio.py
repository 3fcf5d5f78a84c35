"""Bit-exact reading and writing of TREC topics, qrels, and run files.

Run files are the contract with external evaluation tooling: one line per
entry, ``topic_id Q0 doc_id rank score tag``, single spaces, ranks from 1,
scores printed with exactly six decimal places. Ties are broken by doc_id
in descending lexicographic order before ranks are assigned, so output is
byte-stable no matter how the in-memory entries were ordered.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

VALID_GRADES = (0, 1, 2)


class TrecFormatError(Exception):
    """Raised for malformed topic, qrels, or run files."""


@dataclass
class Topic:
    topic_id: str
    query: str = ""
    question: str = ""
    narrative: str = ""


@dataclass
class QrelSet:
    # topic_id -> doc_id -> grade in {0, 1, 2}
    judgments: dict[str, dict[str, int]] = field(default_factory=dict)

    def grade(self, topic_id: str, doc_id: str) -> int | None:
        return self.judgments.get(topic_id, {}).get(doc_id)

    def set_grade(self, topic_id: str, doc_id: str, grade: int) -> None:
        if grade not in VALID_GRADES:
            raise ValueError(f"grade must be one of {VALID_GRADES}, got {grade}")
        self.judgments.setdefault(topic_id, {})[doc_id] = grade


@dataclass
class Run:
    tag: str
    # topic_id -> [(doc_id, score)] ordered best-first
    entries: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def validate(self) -> None:
        for topic_id, items in self.entries.items():
            seen: set[str] = set()
            prev = math.inf
            for doc_id, score in items:
                if not math.isfinite(score):
                    raise TrecFormatError(
                        f"topic {topic_id}: non-finite score for {doc_id}"
                    )
                if doc_id in seen:
                    raise TrecFormatError(
                        f"topic {topic_id}: duplicate doc_id {doc_id}"
                    )
                seen.add(doc_id)
                if score > prev:
                    raise TrecFormatError(
                        f"topic {topic_id}: scores increase at {doc_id}"
                    )
                prev = score


def sort_scored(items: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    """Order by score descending, breaking ties by doc_id descending."""
    by_doc = sorted(items, key=lambda e: e[0], reverse=True)
    return sorted(by_doc, key=lambda e: e[1], reverse=True)


def parse_topics(file: str | Path, format: str = "tsv") -> list[Topic]:
    """Parse topics in file order; fields are whitespace-trimmed."""
    file = Path(file)
    if not file.exists():
        raise FileNotFoundError(f"topics file not found: {file}")
    if format == "tsv":
        return _parse_topics_tsv(file)
    if format == "trec_xml":
        return _parse_topics_xml(file)
    raise ValueError(f"unknown topic format: {format}")


def _parse_topics_tsv(file: Path) -> list[Topic]:
    topics = []
    with file.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise TrecFormatError(
                    f"{file}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            topic_id, query, question, narrative = (p.strip() for p in parts)
            if not question:
                raise TrecFormatError(f"{file}:{lineno}: empty question field")
            topics.append(Topic(topic_id, query, question, narrative))
    return topics


def _parse_topics_xml(file: Path) -> list[Topic]:
    try:
        tree = ET.parse(file)
    except ET.ParseError as exc:
        raise TrecFormatError(f"{file}: line {exc.position[0]}: {exc.msg}") from exc
    topics = []
    for elem in tree.getroot().iter("topic"):
        topic_id = (elem.get("number") or "").strip()
        question = (elem.findtext("question") or "").strip()
        if not topic_id or not question:
            raise TrecFormatError(
                f"{file}: topic element missing number or question"
            )
        topics.append(
            Topic(
                topic_id,
                (elem.findtext("query") or "").strip(),
                question,
                (elem.findtext("narrative") or "").strip(),
            )
        )
    return topics


def parse_qrels(file: str | Path) -> QrelSet:
    """Parse whitespace-separated ``topic iter doc grade`` judgment lines.

    Later duplicates of a (topic, doc) pair overwrite earlier ones.
    """
    file = Path(file)
    if not file.exists():
        raise FileNotFoundError(f"qrels file not found: {file}")
    qrels = QrelSet()
    with file.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise TrecFormatError(
                    f"{file}:{lineno}: expected 4 columns, got {len(parts)}"
                )
            topic_id, _, doc_id, grade_str = parts
            try:
                grade = int(grade_str)
            except ValueError:
                raise TrecFormatError(
                    f"{file}:{lineno}: non-integer grade '{grade_str}'"
                ) from None
            if grade not in VALID_GRADES:
                raise TrecFormatError(
                    f"{file}:{lineno}: grade {grade} outside {VALID_GRADES}"
                )
            qrels.judgments.setdefault(topic_id, {})[doc_id] = grade
    return qrels


def write_run(run: Run, file: str | Path) -> None:
    """Write a run file; output bytes are identical across platforms."""
    run.validate()
    lines = []
    for topic_id in sorted(run.entries):
        ranked = sort_scored(run.entries[topic_id])
        for rank, (doc_id, score) in enumerate(ranked, start=1):
            lines.append(f"{topic_id} Q0 {doc_id} {rank} {score:.6f} {run.tag}")
    Path(file).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_run(file: str | Path) -> Run:
    file = Path(file)
    if not file.exists():
        raise FileNotFoundError(f"run file not found: {file}")
    run = Run(tag="")
    with file.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise TrecFormatError(
                    f"{file}:{lineno}: expected 6 columns, got {len(parts)}"
                )
            topic_id, _, doc_id, _, score_str, tag = parts
            try:
                score = float(score_str)
            except ValueError:
                raise TrecFormatError(
                    f"{file}:{lineno}: bad score '{score_str}'"
                ) from None
            run.tag = run.tag or tag
            run.entries.setdefault(topic_id, []).append((doc_id, score))
    run.validate()
    return run
