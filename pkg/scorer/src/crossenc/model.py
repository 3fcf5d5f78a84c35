"""Cross-encoder model: a transformer encoder over the concatenated
(query, document) token sequence with a linear relevance head on the
first position.

The relevance head is zero-initialized, so an untrained model scores
every pair 0 and the pairwise loss starts at ln 2 exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import torch
from torch import nn

from .vocab import WordVocab

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    kind: str = "mini"             # "mini" or "pretrained"
    base_checkpoint: str | None = None
    dim: int = 32
    heads: int = 4
    layers: int = 2
    max_sequence: int = 64
    vocab_size: int = 0


@dataclass
class TrainConfig:
    encoder_lr: float = 2e-5
    head_lr: float = 1e-3
    batch_size: int = 16
    grad_accumulation: int = 2
    patience: int = 20
    samples_per_validation: int = 512
    validate_every: int = 8        # optimizer steps per validation interval
    max_intervals: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.encoder_lr <= 0 or self.head_lr <= 0:
            raise ValueError("learning rates must be positive")
        for name in ("batch_size", "grad_accumulation", "patience",
                     "samples_per_validation", "validate_every", "max_intervals"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


class MiniCrossEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.embed = nn.Embedding(config.vocab_size, config.dim, padding_idx=0)
        self.position = nn.Embedding(config.max_sequence, config.dim)
        layer = nn.TransformerEncoderLayer(
            d_model=config.dim,
            nhead=config.heads,
            dim_feedforward=config.dim * 4,
            dropout=0.0,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, config.layers, enable_nested_tensor=False
        )
        self.head = nn.Linear(config.dim, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """ids: (batch, seq) int64; mask: (batch, seq) bool, True = real token.
        Returns (batch,) relevance logits."""
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.embed(ids) + self.position(positions).unsqueeze(0)
        hidden = self.encoder(x, src_key_padding_mask=~mask)
        return self.head(hidden[:, 0, :]).squeeze(-1)

    def encoder_parameters(self):
        for name, param in self.named_parameters():
            if not name.startswith("head."):
                yield param

    def head_parameters(self):
        return self.head.parameters()


def build_mini(vocab: WordVocab, dim: int = 32, heads: int = 4, layers: int = 2,
               max_sequence: int = 64, seed: int = 0) -> MiniCrossEncoder:
    torch.manual_seed(seed)
    config = ModelConfig(kind="mini", dim=dim, heads=heads, layers=layers,
                         max_sequence=max_sequence, vocab_size=len(vocab))
    return MiniCrossEncoder(config)


def save_checkpoint(model: MiniCrossEncoder, vocab: WordVocab,
                    out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"version": CHECKPOINT_VERSION, **asdict(model.config)}
    (out_dir / "config.json").write_text(json.dumps(payload, indent=2),
                                         encoding="utf-8")
    vocab.save(out_dir / "vocab.txt")
    torch.save(model.state_dict(), out_dir / "weights.pt")


def load_checkpoint(ckpt_dir: str | Path) -> tuple[MiniCrossEncoder, WordVocab]:
    ckpt_dir = Path(ckpt_dir)
    config_file = ckpt_dir / "config.json"
    if not config_file.exists():
        raise FileNotFoundError(f"no checkpoint at {ckpt_dir}")
    payload = json.loads(config_file.read_text(encoding="utf-8"))
    version = payload.pop("version", None)
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"{ckpt_dir}: checkpoint version {version} != {CHECKPOINT_VERSION}"
        )
    config = ModelConfig(**payload)
    vocab = WordVocab.load(ckpt_dir / "vocab.txt")
    model = MiniCrossEncoder(config)
    model.load_state_dict(torch.load(ckpt_dir / "weights.pt",
                                     weights_only=True))
    model.eval()
    return model, vocab


def load_pretrained_scorer(base_checkpoint: str):
    """Wrap a pretrained transformer plus its own tokenizer as a score
    function. Requires the optional `transformers` dependency; the base
    checkpoint is a runtime choice so swapping general-domain for
    scientific-domain weights is a config change only."""
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(base_checkpoint)
    model = AutoModelForSequenceClassification.from_pretrained(
        base_checkpoint, num_labels=1
    )
    model.eval()

    def score(query: str, doc: str) -> float:
        enc = tokenizer(query, doc, truncation=True,
                        max_length=tokenizer.model_max_length,
                        return_tensors="pt")
        with torch.no_grad():
            return float(model(**enc).logits.squeeze())

    return score
