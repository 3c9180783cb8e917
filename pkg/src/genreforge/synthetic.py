"""Deterministic synthetic corpus suites for demos and end-to-end tests.

Generates a Gutenberg-shaped corpus tree (markers included), dependency
parses, token-level metaphor annotations, per-language lexicon copies, and a
ready-to-run pipeline config.  Everything is a pure function of the seed, so
two generated suites with the same seed are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ingest as ing
from . import metre as met_re
from .ingest import Genre, Language
from .metre import load_bundled_lexicon, tokenize


def _words_for(language: Language) -> list[str]:
    return sorted(load_bundled_lexicon(language).entries)


def _doc_seed(seed: int, language: Language, genre: Genre, doc_index: int) -> list[int]:
    return [seed, ord(language.value[0]), ord(genre.value[0]), doc_index]


def _prose_body(words: Sequence[str], rng: np.random.Generator, n_sentences: int) -> str:
    sentences = []
    for _ in range(n_sentences):
        k = int(rng.integers(4, 9))
        chosen = [words[int(i)] for i in rng.integers(0, len(words), size=k)]
        end = "." if rng.random() < 0.8 else ("!" if rng.random() < 0.5 else "?")
        sentences.append(chosen[0].capitalize() + " " + " ".join(chosen[1:]) + end)
    return " ".join(sentences)


def _verse_body(words: Sequence[str], rng: np.random.Generator, n_lines: int) -> str:
    lines = []
    for _ in range(n_lines):
        k = int(rng.integers(3, 7))
        chosen = [words[int(i)] for i in rng.integers(0, len(words), size=k)]
        lines.append(" ".join(chosen).capitalize())
    return "\n".join(lines)


def write_corpus(
    root: Path,
    languages: Sequence[Language],
    seed: int,
    sentences_per_cell: int = 60,
    docs_per_cell: int = 2,
) -> Path:
    corpus = Path(root) / "corpus"
    for language in languages:
        words = _words_for(language)
        for genre in ing.GENRES:
            genre_dir = corpus / language.value.lower() / genre.value.lower()
            genre_dir.mkdir(parents=True, exist_ok=True)
            per_doc = max(1, sentences_per_cell // docs_per_cell)
            for d in range(docs_per_cell):
                rng = np.random.default_rng(_doc_seed(seed, language, genre, d))
                if genre is Genre.POETRY:
                    body = _verse_body(words, rng, per_doc)
                else:
                    body = _prose_body(words, rng, per_doc)
                text = (
                    f"Demo edition {language.value} {genre.value} {d}\n"
                    "*** START OF THIS DEMO EBOOK ***\n"
                    f"{body}\n"
                    "*** END OF THIS DEMO EBOOK ***\n"
                    "End matter.\n"
                )
                (genre_dir / f"{language.value.lower()}_{genre.value.lower()}_{d}.txt").write_text(
                    text, encoding="utf-8"
                )
    return corpus


def write_parses(manifest: ing.DatasetManifest, root: Path, seed: int) -> Path:
    """One .conllu file per language covering every manifest sentence."""
    parse_dir = Path(root) / "parses"
    parse_dir.mkdir(parents=True, exist_ok=True)
    by_lang: dict[Language, list[ing.SentenceRecord]] = {}
    for rec in manifest.records:
        by_lang.setdefault(rec.language, []).append(rec)
    for language, records in sorted(by_lang.items(), key=lambda kv: kv[0].value):
        chunks = []
        for rec in sorted(records, key=lambda r: r.sentence_id):
            tokens = tokenize(rec.text) or ["x"]
            rng = np.random.default_rng([seed, int(rec.sentence_id[:8], 16)])
            lines = [f"# sent_id = {rec.sentence_id}"]
            for i, form in enumerate(tokens, start=1):
                head = 0 if i == 1 else int(rng.integers(0, i))
                lines.append(
                    "\t".join([str(i), form, "_", "_", "_", "_", str(head), "_", "_", "_"])
                )
            chunks.append("\n".join(lines))
        (parse_dir / f"{language.value.lower()}.conllu").write_text(
            "\n\n".join(chunks) + "\n", encoding="utf-8"
        )
    return parse_dir


def write_annotations(manifest: ing.DatasetManifest, root: Path, seed: int) -> Path:
    path = Path(root) / "metaphor_annotations.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for rec in manifest.records:
            tokens = tokenize(rec.text) or ["x"]
            rng = np.random.default_rng([seed + 1, int(rec.sentence_id[:8], 16)])
            labels = (rng.random(len(tokens)) < 0.25).astype(int).tolist()
            fh.write(json.dumps({"sentence_id": rec.sentence_id, "labels": labels}) + "\n")
    return path


def write_lexicons(root: Path, languages: Sequence[Language]) -> Path:
    lex_dir = Path(root) / "lexicons"
    lex_dir.mkdir(parents=True, exist_ok=True)
    for language in languages:
        lex = load_bundled_lexicon(language)
        lines = [
            f"{word}\t{''.join(str(b) for b in marks)}"
            for word, marks in sorted(lex.entries.items())
        ]
        (lex_dir / f"{language.value.lower()}.tsv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    return lex_dir


def write_pipeline_config(
    root: Path,
    languages: Sequence[Language],
    tasks: Sequence[str],
    seed: int,
    target_per_genre: int,
    feature_sets: Sequence[str] = ("none", "syntax", "metaphor", "metre"),
    encoder_dim: int = 512,
    epochs: int = 15,
) -> Path:
    path = Path(root) / "pipeline.toml"
    langs = ", ".join(f'"{l.value}"' for l in languages)
    task_list = ", ".join(f'"{t}"' for t in tasks)
    sets = ", ".join(f'"{s}"' for s in feature_sets)
    path.write_text(
        f"""[paths]
corpus = "corpus"
lexicons = "lexicons"
parses = "parses"
metaphor_annotations = "metaphor_annotations.jsonl"
output = "out"

[ingest]
seed = {seed}
target_per_genre = {target_per_genre}

[grid]
tasks = [{task_list}]
languages = [{langs}]
feature_sets = [{sets}]

[encoder]
ngram_min = 2
ngram_max = 3
dim = {encoder_dim}
hash_seed = {seed}
normalize = true

[train]
learning_rate = 0.5
epochs = {epochs}
batch_size = 32
l2 = 1e-4
seed = {seed}
""",
        encoding="utf-8",
    )
    return path


def build_demo_suite(
    root: Path,
    languages: Sequence[Language] = (Language.EN, Language.FR),
    tasks: Sequence[str] = ("P:N", "N:D"),
    seed: int = 20240601,
    target_per_genre: int = 40,
    sentences_per_cell: int = 60,
) -> Path:
    """Corpus + parses + annotations + lexicons + pipeline.toml under `root`."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    corpus = write_corpus(root, languages, seed, sentences_per_cell=sentences_per_cell)
    manifest = ing.ingest_corpus(corpus, seed, target_per_genre)
    write_parses(manifest, root, seed)
    write_annotations(manifest, root, seed)
    write_lexicons(root, languages)
    return write_pipeline_config(root, languages, tasks, seed, target_per_genre)
