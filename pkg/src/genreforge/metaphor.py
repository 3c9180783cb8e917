"""Per-sentence metaphor counts from token annotations, with a lexicon proxy fallback.

The annotation interchange format is one JSON object per line:
{"sentence_id": ..., "labels": [0|1, ...]} with one label per token.  The
proxy path counts tokens whose normalized form appears in a lemma lexicon and
is explicitly labeled as such so the two sources are never conflated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .ingest import Genre
from .metre import normalize_word, tokenize


class DuplicateId(ValueError):
    pass


class NonBinaryLabel(ValueError):
    pass


class MetaphorSource(str, Enum):
    ANNOTATION = "Annotation"
    LEXICON_PROXY = "LexiconProxy"


@dataclass(frozen=True)
class TokenAnnotation:
    sentence_id: str
    labels: tuple[int, ...]


@dataclass(frozen=True)
class MetaphorFeature:
    sentence_id: str
    count: int
    source: MetaphorSource


def load_token_annotations(path: Path) -> dict[str, TokenAnnotation]:
    annotations: dict[str, TokenAnnotation] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            sid = d["sentence_id"]
            if sid in annotations:
                raise DuplicateId(f"{path}:{line_no}: duplicate sentence_id {sid!r}")
            labels = d["labels"]
            if any(label not in (0, 1) for label in labels):
                raise NonBinaryLabel(f"{path}:{line_no}: labels must be 0/1")
            annotations[sid] = TokenAnnotation(sentence_id=sid, labels=tuple(labels))
    return annotations


def metaphor_count(annotation: TokenAnnotation) -> int:
    return sum(annotation.labels)


def load_metaphor_lexicon(path: Path) -> frozenset[str]:
    """One lowercase lemma per line; '#' comments allowed."""
    lemmas = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            lemmas.add(line)
    return frozenset(lemmas)


def proxy_count(sentence_text: str, metaphor_lexicon: frozenset[str]) -> int:
    return sum(1 for tok in tokenize(sentence_text) if normalize_word(tok) in metaphor_lexicon)


def genre_average_metaphors(
    features: Iterable[tuple[MetaphorFeature, Genre]],
) -> dict[Genre, float]:
    """Arithmetic mean of counts per genre, to 2 decimals; empty genres omitted."""
    sums: dict[Genre, int] = {}
    counts: dict[Genre, int] = {}
    for feat, genre in features:
        sums[genre] = sums.get(genre, 0) + feat.count
        counts[genre] = counts.get(genre, 0) + 1
    return {genre: round(sums[genre] / counts[genre], 2) for genre in sums}


# ---------------------------------------------------------------------------
# Sidecar I/O

def write_metaphor_sidecar(features: Iterable[MetaphorFeature], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for feat in features:
            fh.write(
                json.dumps(
                    {
                        "sentence_id": feat.sentence_id,
                        "count": feat.count,
                        "source": feat.source.value,
                    }
                )
                + "\n"
            )


def read_metaphor_sidecar(path: Path) -> dict[str, MetaphorFeature]:
    out: dict[str, MetaphorFeature] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            out[d["sentence_id"]] = MetaphorFeature(
                sentence_id=d["sentence_id"],
                count=int(d["count"]),
                source=MetaphorSource(d["source"]),
            )
    return out


def extract_metaphor_features(
    records: Iterable,
    annotations: Mapping[str, TokenAnnotation] | None = None,
    lexicon: frozenset[str] | None = None,
) -> list[MetaphorFeature]:
    """Counts for each record, from annotations if given, else the lexicon proxy."""
    if annotations is None and lexicon is None:
        raise ValueError("need token annotations or a metaphor lexicon")
    out = []
    for rec in records:
        if annotations is not None:
            ann = annotations.get(rec.sentence_id)
            if ann is None:
                raise KeyError(f"no annotation for sentence {rec.sentence_id!r}")
            out.append(
                MetaphorFeature(
                    sentence_id=rec.sentence_id,
                    count=metaphor_count(ann),
                    source=MetaphorSource.ANNOTATION,
                )
            )
        else:
            out.append(
                MetaphorFeature(
                    sentence_id=rec.sentence_id,
                    count=proxy_count(rec.text, lexicon),
                    source=MetaphorSource.LEXICON_PROXY,
                )
            )
    return out
