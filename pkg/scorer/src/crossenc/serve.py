"""Line-protocol scoring server.

Request lines are ``pair_id<TAB>query<TAB>doc``; each gets exactly one
``pair_id<TAB>score`` response. Pipe mode answers until stdin closes;
TCP mode frames batches with a ``##END##`` line in both directions.
Requests are accumulated (up to 64 lines or 50 ms) and then scored;
scoring runs one pair at a time so identical inputs always produce
bit-identical scores regardless of how batches were split.
"""

from __future__ import annotations

import select
import socket
import sys
from typing import Callable, TextIO

import torch

from .model import MiniCrossEncoder, load_checkpoint, load_pretrained_scorer
from .train import encode_batch
from .vocab import WordVocab

BATCH_TERMINATOR = "##END##"
MAX_BATCH_LINES = 64
FLUSH_SECONDS = 0.05

ScoreFn = Callable[[str, str], float]


def checkpoint_score_fn(ckpt_dir: str) -> ScoreFn:
    model, vocab = load_checkpoint(ckpt_dir)
    torch.set_num_threads(1)

    def score(query: str, doc: str) -> float:
        ids, mask = encode_batch(vocab, [(query, doc)], model.config.max_sequence)
        with torch.no_grad():
            return float(model(ids, mask)[0])

    return score


def respond_line(line: str, score_fn: ScoreFn) -> str | None:
    line = line.rstrip("\n")
    if not line:
        return None
    parts = line.split("\t")
    if len(parts) != 3:
        return f"{parts[0]}\tERR"
    pair_id, query, doc = parts
    return f"{pair_id}\t{score_fn(query, doc)!r}"


def _flush(batch: list[str], score_fn: ScoreFn, out: TextIO) -> None:
    for line in batch:
        response = respond_line(line, score_fn)
        if response is not None:
            out.write(response + "\n")
    out.flush()
    batch.clear()


def serve_pipe(score_fn: ScoreFn, stdin: TextIO | None = None,
               stdout: TextIO | None = None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    batch: list[str] = []
    while True:
        ready, _, _ = select.select([stdin], [], [], FLUSH_SECONDS)
        if not ready:
            if batch:
                _flush(batch, score_fn, stdout)
            continue
        line = stdin.readline()
        if line == "":  # end of input
            _flush(batch, score_fn, stdout)
            return
        batch.append(line)
        if len(batch) >= MAX_BATCH_LINES:
            _flush(batch, score_fn, stdout)


def serve_tcp(score_fn: ScoreFn, address: str,
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
                batch: list[str] = []
                for line in reader:
                    if line.rstrip("\n") == BATCH_TERMINATOR:
                        _flush(batch, score_fn, writer)
                        writer.write(BATCH_TERMINATOR + "\n")
                        writer.flush()
                        served += 1
                        if max_batches is not None and served >= max_batches:
                            break
                    else:
                        batch.append(line)
                        if len(batch) >= MAX_BATCH_LINES:
                            _flush(batch, score_fn, writer)
