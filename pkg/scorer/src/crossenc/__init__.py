"""crossenc: transformer cross-encoder relevance scorer with a line-protocol
serving mode and pairwise training on preference files."""

__version__ = "0.1.0"
