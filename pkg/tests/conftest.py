"""Shared fixtures: a planted synthetic corpus whose qrels make an oracle
re-ranker provably ideal, plus small builder helpers."""

from __future__ import annotations

import sys

import pytest

from medrank.corpus import Document
from medrank.trecio import QrelSet, Topic

PY = sys.executable


def make_doc(doc_id, title="", abstract="", date=None, paragraphs=()):
    return Document(
        doc_id=doc_id,
        title=title,
        abstract=abstract,
        paragraphs=list(paragraphs),
        publish_date=date,
    )


def planted_fixture():
    """30 documents, 5 topics, graded qrels.

    Per topic, every grade>=1 document contains the topic keyword and
    survives the 2020-01-01 date filter, so BM25 retrieves it and an
    oracle scorer (score = grade) produces a gain-ideal top 10. Question
    words other than the keyword appear in no document. Topic q2 carries a
    planted pre-2020 distractor ('vold') with the highest keyword tf: with
    the filter off and depth 5 it enters the re-rank block and displaces
    one fully-relevant document.
    """
    docs = []
    qrels = QrelSet()

    def add(doc_id, topic, grade, title, abstract, date="2020-05-01"):
        docs.append(make_doc(doc_id, title, abstract, date))
        if grade is not None:
            qrels.set_grade(topic, doc_id, grade)

    # q1: transmission (3 fully, 2 partially relevant, 1 judged 0)
    add("t1a", "q1", 2, "Transmission dynamics", "transmission between households")
    add("t1b", "q1", 2, "Indoor transmission", "transmission transmission events")
    add("t1c", "q1", 2, "Transmission report", "observed transmission chains", "2020")
    add("t1d", "q1", 1, "Transmission note", "possible transmission route")
    add("t1e", "q1", 1, "Commentary on transmission", "brief transmission remark")
    add("t1f", "q1", 0, "Transmission rumor", "unverified transmission claim")

    # q2: vaccine (5 fully relevant; planted pre-2020 distractor)
    for i, suffix in enumerate("abcde"):
        add(f"v2{suffix}", "q2", 2, f"Vaccine study {i}",
            "vaccine trial results for vaccine recipients")
    add("vold", "q2", 0, "Vaccine vaccine vaccine",
        "vaccine vaccine", date="2019-06-15")

    # q3: mask (2 fully, 1 partially relevant, 1 judged 0)
    add("m3a", "q3", 2, "Mask mandates", "mask use reduced cases")
    add("m3b", "q3", 2, "Mask fit", "mask mask filtration data", "2020")
    add("m3c", "q3", 1, "Mask survey", "self reported mask wearing")
    add("m3d", "q3", 0, "Mask opinion", "editorial on mask debates")

    # q4: antibody (4 fully relevant; one judged-0 never retrieved)
    for i, suffix in enumerate("abcd"):
        add(f"a4{suffix}", "q4", 2, f"Antibody persistence {i}",
            "antibody levels over months")
    add("a4e", "q4", 0, "Serology overview", "general serology methods")

    # q5: ventilation (1 fully, 1 partially relevant, 1 judged 0)
    add("n5a", "q5", 2, "Ventilation upgrade", "ventilation lowered exposure")
    add("n5b", "q5", 1, "Ventilation modeling", "simulated ventilation effects")
    add("n5c", "q5", 0, "Ventilation anecdote", "single room ventilation story")

    # unjudged filler, mixed dates; none mention a topic keyword
    add("f01", None, None, "Hospital capacity", "beds and staffing pressure")
    add("f02", None, None, "School closures", "remote learning outcomes", "2020")
    add("f03", None, None, "Economic impact", "supply chains and demand", None)
    add("f04", None, None, "Wastewater signals", "sewage surveillance trends")
    add("f05", None, None, "Archived influenza notes", "older influenza data",
        "2018-11-02")
    add("f06", None, None, "Genome sequencing", "variant lineage tracking",
        "2021-01-10")

    assert len(docs) == 30
    topics = [
        Topic("q1", question="unusual inquiry regarding transmission pathways"),
        Topic("q2", question="unusual inquiry regarding vaccine efficacy"),
        Topic("q3", question="unusual inquiry regarding mask behaviour"),
        Topic("q4", question="unusual inquiry regarding antibody duration"),
        Topic("q5", question="unusual inquiry regarding ventilation benefit"),
    ]
    relevant_counts = {"q1": 5, "q2": 5, "q3": 3, "q4": 4, "q5": 2}
    return docs, topics, qrels, relevant_counts


@pytest.fixture
def planted():
    return planted_fixture()


def write_qrels(qrels: QrelSet, path) -> None:
    lines = []
    for topic_id in sorted(qrels.judgments):
        for doc_id, grade in sorted(qrels.judgments[topic_id].items()):
            lines.append(f"{topic_id} 0 {doc_id} {grade}")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_topics_tsv(topics, path) -> None:
    path.write_text(
        "".join(
            f"{t.topic_id}\t{t.query}\t{t.question}\t{t.narrative}\n" for t in topics
        ),
        encoding="utf-8",
    )
