"""Word-level vocabulary for the miniature cross-encoder.

Pretrained checkpoints bring their own subword tokenizer; the miniature
model builds a plain word vocabulary from the training file so tests
never download anything.
"""

from __future__ import annotations

from pathlib import Path

PAD, CLS, SEP, UNK = 0, 1, 2, 3
RESERVED = ("[PAD]", "[CLS]", "[SEP]", "[UNK]")


class WordVocab:
    def __init__(self, words: list[str]):
        self.id_to_word = list(RESERVED) + words
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word)}

    def __len__(self) -> int:
        return len(self.id_to_word)

    @classmethod
    def build(cls, texts, max_size: int = 5000) -> "WordVocab":
        counts: dict[str, int] = {}
        for text in texts:
            for word in text.lower().split():
                counts[word] = counts.get(word, 0) + 1
        ranked = sorted(counts, key=lambda w: (-counts[w], w))
        return cls(ranked[: max_size - len(RESERVED)])

    def encode_pair(self, query: str, doc: str, max_seq: int) -> list[int]:
        """[CLS] query [SEP] doc [SEP], truncated to max_seq ids."""
        lookup = self.word_to_id
        q_ids = [lookup.get(w, UNK) for w in query.lower().split()]
        d_ids = [lookup.get(w, UNK) for w in doc.lower().split()]
        budget = max_seq - 3
        if len(q_ids) > budget:
            q_ids = q_ids[:budget]
        d_budget = budget - len(q_ids)
        if len(d_ids) > d_budget:
            d_ids = d_ids[:d_budget]
        return [CLS] + q_ids + [SEP] + d_ids + [SEP]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            "".join(w + "\n" for w in self.id_to_word), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "WordVocab":
        words = Path(path).read_text(encoding="utf-8").splitlines()
        if words[: len(RESERVED)] != list(RESERVED):
            raise ValueError(f"{path}: not a vocabulary file")
        return cls(words[len(RESERVED):])
