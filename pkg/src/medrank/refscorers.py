"""Reference scorers speaking the re-ranker wire protocol.

These exist so the pipeline can be exercised end to end without any
neural model: an echo scorer (score = doc text length), a constant
scorer, and an oracle scorer that answers with the qrels grade. A
``misbehave`` mode breaks the protocol on purpose for negative tests.

Run as a module:
    python -m medrank.refscorers echo
    python -m medrank.refscorers grade --qrels qrels.txt --tcp 127.0.0.1:9100
"""

from __future__ import annotations

import argparse
import socket
import sys
from typing import Callable, TextIO

from .trecio import parse_qrels

BATCH_TERMINATOR = "##END##"

ScoreFn = Callable[[str, str, str], float]


def echo_score(pair_id: str, query: str, doc: str) -> float:
    return float(len(doc))


def make_constant(value: float) -> ScoreFn:
    def score(pair_id: str, query: str, doc: str) -> float:
        return value
    return score


def make_grade_oracle(qrels_file: str) -> ScoreFn:
    """Score = relevance grade of (topic, doc), with pair ids formed as
    ``topic_id:doc_id``. Unjudged pairs score 0."""
    qrels = parse_qrels(qrels_file)

    def score(pair_id: str, query: str, doc: str) -> float:
        topic_id, _, doc_id = pair_id.partition(":")
        return float(qrels.grade(topic_id, doc_id) or 0)

    return score


def respond(line: str, score_fn: ScoreFn, mode: str, state: dict) -> list[str]:
    line = line.rstrip("\n")
    if not line:
        return []
    parts = line.split("\t")
    if len(parts) != 3:
        return [f"{parts[0]}\tERR"]
    pair_id, query, doc = parts
    if mode == "drop" and state.setdefault("n", 0) == 0:
        state["n"] += 1
        return []
    if mode == "dup":
        value = score_fn(pair_id, query, doc)
        return [f"{pair_id}\t{value}", f"{pair_id}\t{value}"]
    if mode == "unknown":
        return [f"bogus-{pair_id}\t1.0"]
    if mode == "nan":
        return [f"{pair_id}\tnan"]
    return [f"{pair_id}\t{score_fn(pair_id, query, doc)}"]


def serve_pipe(score_fn: ScoreFn, mode: str = "ok",
               stdin: TextIO | None = None, stdout: TextIO | None = None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    state: dict = {}
    for line in stdin:
        for out in respond(line, score_fn, mode, state):
            stdout.write(out + "\n")
    stdout.flush()


def serve_tcp(score_fn: ScoreFn, address: str, mode: str = "ok",
              max_batches: int | None = None) -> None:
    host, _, port = address.partition(":")
    server = socket.create_server((host, int(port)))
    served = 0
    with server:
        while max_batches is None or served < max_batches:
            conn, _ = server.accept()
            with conn:
                reader = conn.makefile("r", encoding="utf-8", newline="\n")
                writer = conn.makefile("w", encoding="utf-8", newline="\n")
                state: dict = {}
                batch: list[str] = []
                for line in reader:
                    if line.rstrip("\n") == BATCH_TERMINATOR:
                        for req in batch:
                            for out in respond(req, score_fn, mode, state):
                                writer.write(out + "\n")
                        writer.write(BATCH_TERMINATOR + "\n")
                        writer.flush()
                        batch = []
                        served += 1
                        if max_batches is not None and served >= max_batches:
                            break
                    else:
                        batch.append(line)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("kind", choices=["echo", "constant", "grade"])
    parser.add_argument("--value", type=float, default=1.0,
                        help="score for the constant scorer")
    parser.add_argument("--qrels", help="qrels file for the grade oracle")
    parser.add_argument("--tcp", metavar="HOST:PORT",
                        help="serve over TCP instead of stdin/stdout")
    parser.add_argument("--mode", default="ok",
                        choices=["ok", "dup", "unknown", "nan", "drop"],
                        help="protocol misbehaviour for negative tests")
    parser.add_argument("--max-batches", type=int, default=None)
    args = parser.parse_args(argv)

    if args.kind == "echo":
        score_fn = echo_score
    elif args.kind == "constant":
        score_fn = make_constant(args.value)
    else:
        if not args.qrels:
            parser.error("grade scorer needs --qrels")
        score_fn = make_grade_oracle(args.qrels)

    if args.tcp:
        serve_tcp(score_fn, args.tcp, args.mode, args.max_batches)
    else:
        serve_pipe(score_fn, args.mode)
    return 0


if __name__ == "__main__":
    sys.exit(main())
