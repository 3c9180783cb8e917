"""genreforge: multilingual literary-genre dataset construction, explicit
linguistic feature extraction (syntactic depth, metaphor counts, metre stress
patterns), a feature-augmented binary genre classifier, and F1/delta/plot
reporting."""

__version__ = "0.1.0"

from .ingest import Genre, Language, Split  # noqa: F401
