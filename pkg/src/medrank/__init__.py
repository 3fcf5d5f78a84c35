"""medrank: two-stage zero-shot retrieval toolkit for medical literature.

Stages: corpus ingestion and date filtering, BM25 inverted indexing,
lexicon-based training-query filtering, external neural re-ranking over a
line protocol, reciprocal rank fusion, and TREC-style evaluation with
paired significance testing.
"""

__version__ = "0.1.0"
