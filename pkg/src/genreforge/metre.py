"""Binary syllable-stress pattern extraction via lexicon lookup with a rule fallback.

Out-of-lexicon words are syllabified by counting vowel groups (per-language
vowel sets, diacritics included) and stressed by a fixed-stress approximation:
EN/DE first syllable, FR last, ES/IT/PT penultimate; monosyllables are always
stressed.  These fallback rules are the normative definition for this package
and are recorded in the sidecar metadata.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import Language

log = logging.getLogger(__name__)


class BadStressString(ValueError):
    """A lexicon line has a malformed stress string."""


class EmptyFile(ValueError):
    """A stress lexicon file contains no entries."""


class Unsyllabifiable(ValueError):
    """No vowel group was found in a word."""


_VOWELS = {
    Language.EN: set("aeiouy"),
    Language.FR: set("aeiouyàâäéèêëîïôöùûüœ"),
    Language.DE: set("aeiouyäöü"),
    Language.ES: set("aeiouáéíóúü"),
    Language.IT: set("aeiouàèéìíòóùú"),
    Language.PT: set("aeiouáàâãéêíóôõúü"),
}

_DEFAULT_STRESS = {
    Language.EN: "initial",
    Language.DE: "initial",
    Language.FR: "final",
    Language.ES: "penultimate",
    Language.IT: "penultimate",
    Language.PT: "penultimate",
}

_TOKEN = re.compile(r"[^\W\d_]+(?:['’][^\W\d_]+)*", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Word tokens: letter runs, apostrophes allowed word-internally."""
    return _TOKEN.findall(text)


def normalize_word(word: str) -> str:
    """Lowercase and strip everything that is not a letter (diacritics kept)."""
    return "".join(mark for mark in word.lower() if mark.isalpha())


@dataclass
class StressLexicon:
    language: Language
    entries: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, normalized_word: str) -> tuple[int, ...] | None:
        return self.entries.get(normalized_word)


@dataclass(frozen=True)
class MetrePattern:
    bits: tuple[int, ...]
    sentence_id: str = ""
    oov_flags: int = 0

    @property
    def syllable_count(self) -> int:
        return len(self.bits)


def load_stress_lexicon(path: Path, language: Language) -> StressLexicon:
    """Read a `word<TAB>stress-string` TSV; first entry wins on duplicates."""
    lexicon = StressLexicon(language=language)
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[1]:
            raise BadStressString(f"{path}:{line_no}: expected word<TAB>stress-string")
        word, marks = fields
        if any(c not in "01" for c in marks):
            raise BadStressString(f"{path}:{line_no}: stress string {marks!r} is not binary")
        norm = normalize_word(word)
        if not norm:
            raise BadStressString(f"{path}:{line_no}: word {word!r} has no letters")
        if norm in lexicon.entries:
            log.warning("duplicate lexicon entry %r at %s:%d; keeping first", norm, path, line_no)
            continue
        lexicon.entries[norm] = tuple(int(c) for c in marks)
    if not lexicon.entries:
        raise EmptyFile(f"{path}: no lexicon entries")
    return lexicon


def load_bundled_lexicon(language: Language) -> StressLexicon:
    path = resources.files("genreforge.data.lexicons") / f"{language.value.lower()}.tsv"
    with resources.as_file(path) as real:
        return load_stress_lexicon(real, language)


def syllable_groups(word: str, language: Language) -> int:
    """Number of vowel groups in a normalized word."""
    vowels = _VOWELS[language]
    count = 0
    in_group = False
    for ch in word:
        if ch in vowels:
            if not in_group:
                count += 1
            in_group = True
        else:
            in_group = False
    return count


def rule_stress(word: str, language: Language) -> list[int]:
    """Fixed-stress fallback for out-of-lexicon words."""
    n = syllable_groups(word, language)
    if n == 0:
        raise Unsyllabifiable(f"no vowel group in {word!r}")
    if n == 1:
        return [1]
    default = _DEFAULT_STRESS[language]
    if default == "initial":
        return [1] + [0] * (n - 1)
    if default == "final":
        return [0] * (n - 1) + [1]
    return [0] * (n - 2) + [1, 0]


def word_stress(word: str, lexicon: StressLexicon, language: Language) -> list[int]:
    """Stress marks for one word: lexicon hit, else the rule syllabifier."""
    norm = normalize_word(word)
    if not norm:
        raise Unsyllabifiable(f"word {word!r} is empty after normalization")
    entry = lexicon.get(norm)
    if entry is not None:
        return list(entry)
    return rule_stress(norm, language)


def metre_pattern(sentence_text: str, lexicon: StressLexicon, language: Language) -> MetrePattern:
    """Concatenated per-word stress marks; unsyllabifiable words contribute [1] and a flag."""
    bits: list[int] = []
    flags = 0
    for token in tokenize(sentence_text):
        try:
            bits.extend(word_stress(token, lexicon, language))
        except Unsyllabifiable:
            bits.append(1)
            flags += 1
    return MetrePattern(bits=tuple(bits), oov_flags=flags)


def default_pad_len(patterns: Sequence[MetrePattern]) -> int:
    """95th percentile of syllable counts, rounded up; at least 1."""
    counts = [p.syllable_count for p in patterns]
    if not counts:
        return 1
    return max(1, math.ceil(float(np.percentile(counts, 95))))


def pad_patterns(patterns: Sequence[MetrePattern], pad_len: int) -> np.ndarray:
    """Right-pad with 0 / truncate every bit vector to pad_len columns."""
    if pad_len < 1:
        raise ValueError("pad_len must be >= 1")
    out = np.zeros((len(patterns), pad_len), dtype=np.float64)
    for i, pat in enumerate(patterns):
        row = pat.bits[:pad_len]
        out[i, : len(row)] = row
    return out


# ---------------------------------------------------------------------------
# Sidecar I/O

def metre_meta_path(path: Path) -> Path:
    return Path(path).with_suffix(".meta.json")


def write_metre_sidecar(
    patterns: Iterable[MetrePattern], path: Path, pad_len: int, languages: Sequence[str] = ()
) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for pat in patterns:
            fh.write(
                json.dumps(
                    {
                        "sentence_id": pat.sentence_id,
                        "bits": "".join(str(b) for b in pat.bits),
                        "syllable_count": pat.syllable_count,
                        "oov_flags": pat.oov_flags,
                    }
                )
                + "\n"
            )
    meta = {
        "pad_len": pad_len,
        "oov_defaults": {lang: _DEFAULT_STRESS[Language(lang)] for lang in languages},
    }
    metre_meta_path(path).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_metre_sidecar(path: Path) -> tuple[dict[str, MetrePattern], int | None]:
    """Returns ({sentence_id: pattern}, pad_len from the sidecar meta if present)."""
    patterns: dict[str, MetrePattern] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            patterns[d["sentence_id"]] = MetrePattern(
                bits=tuple(int(c) for c in d["bits"]),
                sentence_id=d["sentence_id"],
                oov_flags=int(d.get("oov_flags", 0)),
            )
    pad_len = None
    meta_path = metre_meta_path(path)
    if meta_path.exists():
        pad_len = json.loads(meta_path.read_text(encoding="utf-8")).get("pad_len")
    return patterns, pad_len
