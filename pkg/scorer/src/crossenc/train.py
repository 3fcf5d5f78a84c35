"""Training: pairwise cross-entropy over (positive, negative) pairs with
Adam, separate encoder/head learning rates, no warm-up, gradient
accumulation, and patience-based early stopping on validation MRR@10 over
the first-stage candidate lists.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.nn.functional import softplus

from .data import Pair, ValidationBundle, mrr_at_10, read_pairs, read_validation_bundle
from .model import (
    MiniCrossEncoder,
    ModelConfig,
    TrainConfig,
    build_mini,
    save_checkpoint,
)
from .vocab import PAD, WordVocab

log = logging.getLogger(__name__)


def encode_batch(vocab: WordVocab, texts: list[tuple[str, str]], max_seq: int):
    rows = [vocab.encode_pair(q, d, max_seq) for q, d in texts]
    width = max(len(r) for r in rows)
    ids = torch.full((len(rows), width), PAD, dtype=torch.long)
    mask = torch.zeros((len(rows), width), dtype=torch.bool)
    for i, row in enumerate(rows):
        ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        mask[i, : len(row)] = True
    return ids, mask


def score_candidates(model: MiniCrossEncoder, vocab: WordVocab,
                     query: str, docs: list[tuple[str, str]]) -> list[tuple[str, float]]:
    """Re-rank (doc_id, text) candidates: score descending, id descending
    on ties, matching the evaluation side's determinism rule."""
    model.eval()
    scored = []
    with torch.no_grad():
        for doc_id, text in docs:
            ids, mask = encode_batch(vocab, [(query, text)],
                                     model.config.max_sequence)
            scored.append((doc_id, float(model(ids, mask)[0])))
    scored.sort(key=lambda e: e[0], reverse=True)
    scored.sort(key=lambda e: e[1], reverse=True)
    return scored


def validation_mrr(model: MiniCrossEncoder, vocab: WordVocab,
                   bundle: ValidationBundle, sample_cap: int = 512) -> float:
    """MRR@10 over re-ranked candidates, capped at sample_cap scored pairs;
    only queries whose full candidate list fits the cap contribute."""
    values = []
    used = 0
    for query_id in sorted(bundle.candidates):
        docs = bundle.candidates[query_id]
        if used + len(docs) > sample_cap and values:
            break
        used += len(docs)
        query_text = bundle.queries[query_id]
        pairs = [(d, bundle.passages[d]) for d in docs]
        ranked = score_candidates(model, vocab, query_text, pairs)
        values.append(mrr_at_10([d for d, _ in ranked],
                                bundle.qrels.get(query_id, {})))
    return sum(values) / len(values) if values else 0.0


@dataclass
class TrainResult:
    best_mrr: float
    best_interval: int
    intervals: int
    interval_losses: list[float] = field(default_factory=list)
    stopped_early: bool = False


def _micro_batches(pairs: list[Pair], batch_size: int):
    """Cycle the pair list forever in file order, batch_size at a time."""
    index = 0
    while True:
        batch = []
        for _ in range(batch_size):
            batch.append(pairs[index])
            index = (index + 1) % len(pairs)
        yield batch


def train(
    pairs_file: str | Path,
    bundle_dir: str | Path,
    out_dir: str | Path,
    cfg: TrainConfig | None = None,
    model_cfg: ModelConfig | None = None,
) -> TrainResult:
    if cfg is None:
        cfg = TrainConfig()
    if model_cfg is None:
        model_cfg = ModelConfig()
    torch.manual_seed(cfg.seed)
    torch.set_num_threads(1)

    pairs = read_pairs(pairs_file)
    bundle = read_validation_bundle(bundle_dir)
    vocab = WordVocab.build(
        [p.query for p in pairs] + [p.pos for p in pairs] + [p.neg for p in pairs]
    )
    model = build_mini(vocab, dim=model_cfg.dim, heads=model_cfg.heads,
                       layers=model_cfg.layers, max_sequence=model_cfg.max_sequence,
                       seed=cfg.seed)
    optimizer = torch.optim.Adam([
        {"params": list(model.encoder_parameters()), "lr": cfg.encoder_lr},
        {"params": list(model.head_parameters()), "lr": cfg.head_lr},
    ])

    batches = _micro_batches(pairs, cfg.batch_size)
    best_mrr = float("-inf")
    best_interval = -1
    bad_streak = 0
    result = TrainResult(best_mrr=0.0, best_interval=0, intervals=0)

    for interval in range(cfg.max_intervals):
        model.train()
        interval_loss = 0.0
        micro_count = cfg.validate_every * cfg.grad_accumulation
        for micro in range(micro_count):
            batch = next(batches)
            texts = [(p.query, p.pos) for p in batch] + \
                    [(p.query, p.neg) for p in batch]
            ids, mask = encode_batch(vocab, texts, model.config.max_sequence)
            scores = model(ids, mask)
            s_pos, s_neg = scores[: len(batch)], scores[len(batch):]
            loss = softplus(s_neg - s_pos).mean()
            (loss / cfg.grad_accumulation).backward()
            interval_loss += float(loss.detach())
            if (micro + 1) % cfg.grad_accumulation == 0:
                optimizer.step()
                optimizer.zero_grad()
        result.interval_losses.append(interval_loss / micro_count)

        mrr = validation_mrr(model, vocab, bundle, cfg.samples_per_validation)
        result.intervals = interval + 1
        if mrr > best_mrr:
            best_mrr = mrr
            best_interval = interval
            bad_streak = 0
            save_checkpoint(model, vocab, out_dir)
        else:
            bad_streak += 1
        log.info("interval %d: loss %.6f mrr@10 %.4f", interval,
                 result.interval_losses[-1], mrr)
        if bad_streak >= cfg.patience:
            result.stopped_early = True
            break

    result.best_mrr = best_mrr
    result.best_interval = best_interval
    return result
