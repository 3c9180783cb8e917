"""Raw Gutenberg-style e-texts to a labeled, sampled, deterministically split sentence dataset.

The ingest pipeline is a pure function of (input files, seed): boilerplate
stripping, per-genre sentence segmentation, seeded per-cell sampling, and a
seeded 80/20 split.  All randomness flows through numpy's PCG64 generator so
manifests are byte-identical across reruns.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, TypeVar

import numpy as np

log = logging.getLogger(__name__)

SPLIT_RNG_NAME = "numpy-pcg64"


class Language(str, Enum):
    EN = "EN"
    FR = "FR"
    DE = "DE"
    ES = "ES"
    IT = "IT"
    PT = "PT"


class Genre(str, Enum):
    DRAMA = "Drama"
    POETRY = "Poetry"
    NOVEL = "Novel"


class Split(str, Enum):
    TRAIN = "Train"
    TEST = "Test"


LANGUAGES = tuple(Language)
GENRES = (Genre.DRAMA, Genre.POETRY, Genre.NOVEL)

# Fixed indices used to derive per-cell RNG streams; order is part of the
# reproducibility contract and must never change.
_LANG_INDEX = {lang: i for i, lang in enumerate(LANGUAGES)}
_GENRE_INDEX = {genre: i for i, genre in enumerate(GENRES)}


class EndBeforeStart(ValueError):
    """An end-of-text marker appears before any start marker."""


class AlreadySplit(ValueError):
    """split_dataset was called on a manifest that already has assignments."""


class EmptyCell(ValueError):
    """A requested (language, genre) cell has no records."""


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    language: Language
    genre: Genre
    raw_text: str
    source_path: str = ""


@dataclass(frozen=True)
class SentenceRecord:
    sentence_id: str
    text: str
    language: Language
    genre: Genre
    split: Split | None
    char_offset: int

    def to_json_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "text": self.text,
            "language": self.language.value,
            "genre": self.genre.value,
            "split": self.split.value if self.split is not None else None,
            "char_offset": self.char_offset,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SentenceRecord":
        return cls(
            sentence_id=d["sentence_id"],
            text=d["text"],
            language=Language(d["language"]),
            genre=Genre(d["genre"]),
            split=Split(d["split"]) if d.get("split") else None,
            char_offset=int(d["char_offset"]),
        )


@dataclass
class DatasetManifest:
    records: list[SentenceRecord]
    split_seed: int
    split_ratio: Fraction = Fraction(4, 5)
    split_rng: str = SPLIT_RNG_NAME
    flagged_docs: list[str] = field(default_factory=list)

    def counts(self) -> dict[tuple[Language, Genre], int]:
        out: dict[tuple[Language, Genre], int] = {}
        for rec in self.records:
            key = (rec.language, rec.genre)
            out[key] = out.get(key, 0) + 1
        return out


def sentence_id_for(doc_id: str, char_offset: int) -> str:
    """Stable 16-hex-digit id derived from the document id and offset."""
    return hashlib.sha1(f"{doc_id}:{char_offset}".encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Boilerplate stripping

_START_MARKER = re.compile(r"^[^\S\n]*\*{3,}\s*START OF.*$", re.IGNORECASE | re.MULTILINE)
_END_MARKER = re.compile(r"^[^\S\n]*\*{3,}\s*END OF.*$", re.IGNORECASE | re.MULTILINE)


def strip_boilerplate(raw_text: str) -> tuple[str, bool]:
    """Return (body, flagged) with license header/footer removed.

    The body is the span strictly between the first start-marker line and the
    first subsequent end-marker line.  Texts without markers come back
    unchanged and flagged; a start marker without a matching end yields
    everything after the start line, also flagged.
    """
    start = _START_MARKER.search(raw_text)
    first_end = _END_MARKER.search(raw_text)
    if start is None and first_end is None:
        return raw_text, True
    if first_end is not None and (start is None or first_end.start() < start.start()):
        raise EndBeforeStart("end-of-text marker precedes the start marker")
    assert start is not None
    end = _END_MARKER.search(raw_text, start.end())
    if end is None:
        return raw_text[start.end():].strip(), True
    return raw_text[start.end():end.start()].strip(), False


# ---------------------------------------------------------------------------
# Sentence segmentation

# Sentence-final punctuation, optional closing quotes/brackets, then the
# whitespace that separates it from the next sentence.
_BOUNDARY = re.compile(r"([.!?…]+[»\"”’')\]]*)(\s+)")
_OPEN_QUOTES = "\"'«“‘([¡¿"
_WORD_BEFORE = re.compile(r"([^\W\d_]+)$", re.UNICODE)

_abbrev_cache: dict[Language, frozenset[str]] = {}


def load_abbreviations(language: Language) -> frozenset[str]:
    """Per-language abbreviation stop-list, shipped as an editable data file."""
    if language not in _abbrev_cache:
        path = resources.files("genreforge.data.abbrev") / f"{language.value.lower()}.txt"
        words = set()
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip().lower()
            if line and not line.startswith("#"):
                words.add(line)
        _abbrev_cache[language] = frozenset(words)
    return _abbrev_cache[language]


def _trimmed_span(body: str, start: int, end: int) -> tuple[str, int] | None:
    while start < end and body[start].isspace():
        start += 1
    while end > start and body[end - 1].isspace():
        end -= 1
    if start == end:
        return None
    return body[start:end], start


def _segment_prose(body: str, stoplist: frozenset[str]) -> list[tuple[str, int]]:
    segments: list[tuple[str, int]] = []
    start = 0
    for m in _BOUNDARY.finditer(body):
        nxt = m.end()
        if nxt < len(body):
            ch = body[nxt]
            if not (ch.isupper() or ch in _OPEN_QUOTES):
                continue
        # Abbreviation guard applies to a lone period only ("Mr.", initials).
        if m.group(1).rstrip("»\"”’')]") == ".":
            w = _WORD_BEFORE.search(body, 0, m.start())
            if w is not None and (w.group(1).lower() in stoplist or len(w.group(1)) == 1):
                continue
        span = _trimmed_span(body, start, m.end(1))
        if span is not None:
            segments.append(span)
        start = nxt
    span = _trimmed_span(body, start, len(body))
    if span is not None:
        segments.append(span)
    return segments


def _segment_lines(body: str) -> list[tuple[str, int]]:
    """Verse segmentation: one line per segment, short lines merged forward."""
    spans: list[tuple[int, int]] = []
    pos = 0
    for raw in body.split("\n"):
        end = pos + len(raw)
        s, e = pos, end
        while s < e and body[s].isspace():
            s += 1
        while e > s and body[e - 1].isspace():
            e -= 1
        if e > s:
            spans.append((s, e))
        pos = end + 1

    segments: list[tuple[str, int]] = []
    group_start: int | None = None
    group_end = 0
    for s, e in spans:
        if group_start is None:
            group_start = s
        group_end = e
        if e - s >= 3:
            segments.append((body[group_start:group_end], group_start))
            group_start = None
    if group_start is not None:
        segments.append((body[group_start:group_end], group_start))
    return segments


def segment_sentences(body: str, language: Language, genre: Genre) -> list[tuple[str, int]]:
    """Split a document body into (text, char_offset) segments.

    Novels and drama split on sentence-final punctuation followed by
    whitespace and an uppercase letter or opening quote, with a per-language
    abbreviation stop-list.  Poetry splits on line breaks, merging lines
    shorter than 3 characters into the next line.
    """
    if genre is Genre.POETRY:
        return _segment_lines(body)
    return _segment_prose(body, load_abbreviations(language))


# ---------------------------------------------------------------------------
# Sampling and splitting

T = TypeVar("T")


def sample_sentences(segments: Sequence[T], target: int, seed: int) -> list[T]:
    """Uniform sample of `target` segments without replacement, original order kept."""
    if target < 1:
        raise ValueError("target must be >= 1")
    if len(segments) <= target:
        return list(segments)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(segments), size=target, replace=False)
    idx.sort()
    return [segments[i] for i in idx]


def _round_half_up(ratio: Fraction, n: int) -> int:
    return int(ratio * n + Fraction(1, 2))


def train_size_for(n: int, ratio: Fraction = Fraction(4, 5)) -> int:
    """Number of Train records for a cell of n records (round-half-up)."""
    return _round_half_up(ratio, n)


def split_dataset(manifest: DatasetManifest) -> DatasetManifest:
    """Assign Train/Test within each (language, genre) cell by seeded shuffle."""
    if any(rec.split is not None for rec in manifest.records):
        raise AlreadySplit("manifest already carries split assignments")

    by_cell: dict[tuple[Language, Genre], list[int]] = {}
    for i, rec in enumerate(manifest.records):
        by_cell.setdefault((rec.language, rec.genre), []).append(i)

    assigned: dict[int, Split] = {}
    for (lang, genre), indices in by_cell.items():
        n = len(indices)
        n_train = _round_half_up(manifest.split_ratio, n)
        rng = np.random.default_rng(
            [manifest.split_seed, _LANG_INDEX[lang], _GENRE_INDEX[genre]]
        )
        order = rng.permutation(n)
        for rank, j in enumerate(order):
            assigned[indices[j]] = Split.TRAIN if rank < n_train else Split.TEST

    new_records = [replace(rec, split=assigned[i]) for i, rec in enumerate(manifest.records)]
    return DatasetManifest(
        records=new_records,
        split_seed=manifest.split_seed,
        split_ratio=manifest.split_ratio,
        split_rng=manifest.split_rng,
        flagged_docs=list(manifest.flagged_docs),
    )


# ---------------------------------------------------------------------------
# Binary pair tasks

_GENRE_LETTER = {"P": Genre.POETRY, "N": Genre.NOVEL, "D": Genre.DRAMA}


def parse_genre(token: str) -> Genre:
    token = token.strip()
    if token.upper() in _GENRE_LETTER:
        return _GENRE_LETTER[token.upper()]
    return Genre(token.capitalize())


@dataclass(frozen=True)
class PairTask:
    """Binary classification dataset for one genre pair in one language.

    Labels are canonical: 0 goes to the lexicographically smaller genre
    (Drama < Novel < Poetry) regardless of how the pair was requested, so the
    same pair always yields the same labeled dataset.  `genres` keeps the
    requested display order for reporting.
    """

    language: Language
    genres: tuple[Genre, Genre]
    labels: dict
    train: tuple[SentenceRecord, ...]
    test: tuple[SentenceRecord, ...]

    @property
    def slug(self) -> str:
        return f"{self.genres[0].value.lower()}_{self.genres[1].value.lower()}_{self.language.value.lower()}"

    @property
    def display(self) -> str:
        return f"{self.genres[0].value}+{self.genres[1].value}"

    def label_of(self, record: SentenceRecord) -> int:
        return self.labels[record.genre]

    def total(self) -> int:
        return len(self.train) + len(self.test)


def build_pair_task(
    manifest: DatasetManifest, genre_a: Genre, genre_b: Genre, language: Language
) -> PairTask:
    if genre_a == genre_b:
        raise ValueError(f"pair task needs two distinct genres, got {genre_a.value} twice")
    low, high = sorted((genre_a, genre_b), key=lambda g: g.value)
    labels = {low: 0, high: 1}

    train: list[SentenceRecord] = []
    test: list[SentenceRecord] = []
    seen = {genre_a: 0, genre_b: 0}
    for rec in manifest.records:
        if rec.language is not language or rec.genre not in labels:
            continue
        seen[rec.genre] += 1
        if rec.split is Split.TRAIN:
            train.append(rec)
        elif rec.split is Split.TEST:
            test.append(rec)
    for genre, n in seen.items():
        if n == 0:
            raise EmptyCell(f"no records for ({language.value}, {genre.value})")
    return PairTask(
        language=language,
        genres=(genre_a, genre_b),
        labels=labels,
        train=tuple(train),
        test=tuple(test),
    )


# ---------------------------------------------------------------------------
# Statistics

def dataset_stats(manifest: DatasetManifest) -> dict:
    """Language x genre count matrix with row/column totals."""
    counts = manifest.counts()
    matrix = {
        lang: {genre: counts.get((lang, genre), 0) for genre in GENRES} for lang in LANGUAGES
    }
    row_totals = {lang: sum(matrix[lang].values()) for lang in LANGUAGES}
    col_totals = {genre: sum(matrix[lang][genre] for lang in LANGUAGES) for genre in GENRES}
    return {
        "matrix": matrix,
        "row_totals": row_totals,
        "col_totals": col_totals,
        "total": sum(row_totals.values()),
    }


def format_stats_tsv(stats: dict) -> str:
    lines = ["Language\t" + "\t".join(g.value for g in GENRES) + "\tTotal"]
    for lang in LANGUAGES:
        row = stats["matrix"][lang]
        lines.append(
            lang.value
            + "\t"
            + "\t".join(str(row[g]) for g in GENRES)
            + f"\t{stats['row_totals'][lang]}"
        )
    lines.append(
        "Total\t"
        + "\t".join(str(stats["col_totals"][g]) for g in GENRES)
        + f"\t{stats['total']}"
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Corpus-level ingestion

def _cell_sample_seed(seed: int, language: Language, genre: Genre) -> int:
    digest = hashlib.blake2b(
        f"sample:{seed}:{language.value}:{genre.value}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def iter_corpus_documents(corpus_dir: Path) -> Iterable[RawDocument]:
    """Yield documents from a corpus/<lang>/<genre>/<doc_id>.txt tree, sorted."""
    corpus_dir = Path(corpus_dir)
    for lang_dir in sorted(p for p in corpus_dir.iterdir() if p.is_dir()):
        language = Language(lang_dir.name.upper())
        for genre_dir in sorted(p for p in lang_dir.iterdir() if p.is_dir()):
            genre = Genre(genre_dir.name.capitalize())
            for doc_path in sorted(genre_dir.glob("*.txt")):
                yield RawDocument(
                    doc_id=doc_path.stem,
                    language=language,
                    genre=genre,
                    raw_text=doc_path.read_text(encoding="utf-8"),
                    source_path=str(doc_path),
                )


def ingest_documents(
    documents: Iterable[RawDocument], seed: int, target_per_genre: int
) -> DatasetManifest:
    """Segment, pool per (language, genre), sample, and split."""
    pooled: dict[tuple[Language, Genre], list[tuple[str, str, int]]] = {}
    flagged: list[str] = []
    for doc in documents:
        if not doc.raw_text:
            raise ValueError(f"document {doc.doc_id} is empty")
        body, was_flagged = strip_boilerplate(doc.raw_text)
        if was_flagged:
            flagged.append(doc.doc_id)
            log.warning("no boilerplate markers in %s; kept full text", doc.doc_id)
        cell = pooled.setdefault((doc.language, doc.genre), [])
        for text, offset in segment_sentences(body, doc.language, doc.genre):
            cell.append((doc.doc_id, text, offset))

    records: list[SentenceRecord] = []
    for (lang, genre) in sorted(pooled, key=lambda k: (_LANG_INDEX[k[0]], _GENRE_INDEX[k[1]])):
        sampled = sample_sentences(
            pooled[(lang, genre)], target_per_genre, _cell_sample_seed(seed, lang, genre)
        )
        for doc_id, text, offset in sampled:
            records.append(
                SentenceRecord(
                    sentence_id=sentence_id_for(doc_id, offset),
                    text=text,
                    language=lang,
                    genre=genre,
                    split=None,
                    char_offset=offset,
                )
            )
    manifest = DatasetManifest(records=records, split_seed=seed, flagged_docs=flagged)
    return split_dataset(manifest)


def ingest_corpus(corpus_dir: Path, seed: int, target_per_genre: int) -> DatasetManifest:
    return ingest_documents(iter_corpus_documents(corpus_dir), seed, target_per_genre)


# ---------------------------------------------------------------------------
# Manifest I/O

def manifest_meta_path(manifest_path: Path) -> Path:
    return Path(manifest_path).with_suffix(".meta.json")


def write_manifest(manifest: DatasetManifest, path: Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(json.dumps(rec.to_json_dict(), ensure_ascii=False) + "\n")
    meta = {
        "split_seed": manifest.split_seed,
        "split_ratio": [manifest.split_ratio.numerator, manifest.split_ratio.denominator],
        "split_rng": manifest.split_rng,
        "flagged_docs": sorted(manifest.flagged_docs),
        "counts": {
            f"{lang.value}/{genre.value}": n
            for (lang, genre), n in sorted(
                manifest.counts().items(),
                key=lambda kv: (_LANG_INDEX[kv[0][0]], _GENRE_INDEX[kv[0][1]]),
            )
        },
    }
    manifest_meta_path(path).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_manifest(path: Path) -> DatasetManifest:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(SentenceRecord.from_json_dict(json.loads(line)))
    split_seed = 0
    split_ratio = Fraction(4, 5)
    split_rng = SPLIT_RNG_NAME
    flagged: list[str] = []
    meta_path = manifest_meta_path(path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        split_seed = meta.get("split_seed", 0)
        num, den = meta.get("split_ratio", [4, 5])
        split_ratio = Fraction(num, den)
        split_rng = meta.get("split_rng", SPLIT_RNG_NAME)
        flagged = list(meta.get("flagged_docs", []))
    return DatasetManifest(
        records=records,
        split_seed=split_seed,
        split_ratio=split_ratio,
        split_rng=split_rng,
        flagged_docs=flagged,
    )
