import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genreforge.ingest import Genre
from genreforge.metaphor import (
    DuplicateId,
    MetaphorFeature,
    MetaphorSource,
    NonBinaryLabel,
    TokenAnnotation,
    genre_average_metaphors,
    load_token_annotations,
    metaphor_count,
    proxy_count,
    read_metaphor_sidecar,
    write_metaphor_sidecar,
)
from genreforge.metre import tokenize


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


class TestLoadAnnotations:
    def test_two_valid_lines(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [{"sentence_id": "a", "labels": [0, 1]}, {"sentence_id": "b", "labels": [1]}])
        loaded = load_token_annotations(path)
        assert len(loaded) == 2
        assert loaded["a"].labels == (0, 1)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [{"sentence_id": "a", "labels": [0]}, {"sentence_id": "a", "labels": [1]}])
        with pytest.raises(DuplicateId):
            load_token_annotations(path)

    def test_non_binary_label(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [{"sentence_id": "a", "labels": [0, 2]}])
        with pytest.raises(NonBinaryLabel):
            load_token_annotations(path)

    def test_twenty_line_fixture_round_trips(self, tmp_path):
        rows = [{"sentence_id": f"s{i}", "labels": [i % 2] * (i + 1)} for i in range(20)]
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, rows)
        loaded = load_token_annotations(path)
        assert len(loaded) == 20
        reserialized = [
            {"sentence_id": sid, "labels": list(ann.labels)} for sid, ann in loaded.items()
        ]
        assert sorted(reserialized, key=lambda r: r["sentence_id"]) == sorted(
            rows, key=lambda r: r["sentence_id"]
        )


class TestCounts:
    def test_all_zero(self):
        assert metaphor_count(TokenAnnotation("x", (0, 0, 0))) == 0

    def test_two_of_four(self):
        assert metaphor_count(TokenAnnotation("x", (0, 1, 1, 0))) == 2

    @given(labels=st.lists(st.integers(0, 1), min_size=1, max_size=50))
    @settings(max_examples=50, deadline=None)
    def test_random_vector_matches_brute_force(self, labels):
        ann = TokenAnnotation("x", tuple(labels))
        brute = 0
        for label in labels:
            brute += label
        count = metaphor_count(ann)
        assert count == brute
        assert 0 <= count <= len(labels)


class TestProxy:
    def test_empty_lexicon(self):
        assert proxy_count("any text at all", frozenset()) == 0

    def test_single_hit(self):
        assert proxy_count("heart of stone", frozenset({"stone"})) == 1

    def test_manual_count_oracle(self):
        text = "The silver river sang; the stone heart of the mountain slept like stone."
        lexicon = frozenset({"stone", "heart", "sang"})
        # hand count: sang(1) + stone(2) + heart(1) = 4
        assert proxy_count(text, lexicon) == 4

    def test_agrees_with_annotation_when_lexicon_matches(self):
        texts = {
            "s1": "the river of glass whispered",
            "s2": "a heart of stone never sleeps",
            "s3": "plain words only here",
        }
        annotations = {
            "s1": TokenAnnotation("s1", (0, 0, 0, 1, 1)),
            "s2": TokenAnnotation("s2", (0, 1, 0, 1, 0, 0)),
            "s3": TokenAnnotation("s3", (0, 0, 0, 0)),
        }
        lexicon = set()
        for sid, ann in annotations.items():
            for tok, label in zip(tokenize(texts[sid]), ann.labels):
                if label:
                    lexicon.add(tok.lower())
        for sid, ann in annotations.items():
            assert proxy_count(texts[sid], frozenset(lexicon)) == metaphor_count(ann)


class TestGenreAverages:
    def test_all_zero_counts(self):
        feats = [
            (MetaphorFeature("a", 0, MetaphorSource.ANNOTATION), Genre.DRAMA),
            (MetaphorFeature("b", 0, MetaphorSource.ANNOTATION), Genre.NOVEL),
        ]
        means = genre_average_metaphors(feats)
        assert means == {Genre.DRAMA: 0.0, Genre.NOVEL: 0.0}

    def test_reference_format_means(self):
        feats = [
            (MetaphorFeature("a", 2, MetaphorSource.ANNOTATION), Genre.NOVEL),
            (MetaphorFeature("b", 3, MetaphorSource.ANNOTATION), Genre.NOVEL),
            (MetaphorFeature("c", 1, MetaphorSource.ANNOTATION), Genre.DRAMA),
            (MetaphorFeature("d", 2, MetaphorSource.ANNOTATION), Genre.DRAMA),
        ]
        means = genre_average_metaphors(feats)
        assert means[Genre.NOVEL] == 2.50
        assert means[Genre.DRAMA] == 1.50

    def test_mean_arithmetic_rounding(self):
        feats = [
            (MetaphorFeature(str(i), c, MetaphorSource.ANNOTATION), Genre.POETRY)
            for i, c in enumerate([1, 1, 2])
        ]
        assert genre_average_metaphors(feats) == {Genre.POETRY: 1.33}

    def test_empty_genre_omitted(self):
        feats = [(MetaphorFeature("a", 1, MetaphorSource.ANNOTATION), Genre.NOVEL)]
        means = genre_average_metaphors(feats)
        assert Genre.DRAMA not in means and Genre.POETRY not in means

    @given(
        counts=st.lists(st.integers(0, 20), min_size=1, max_size=30),
        k=st.integers(1, 10),
    )
    @settings(max_examples=50, deadline=None)
    def test_translation_equivariance(self, counts, k):
        base = [
            (MetaphorFeature(str(i), c, MetaphorSource.ANNOTATION), Genre.NOVEL)
            for i, c in enumerate(counts)
        ]
        shifted = [
            (MetaphorFeature(str(i), c + k, MetaphorSource.ANNOTATION), Genre.NOVEL)
            for i, c in enumerate(counts)
        ]
        a = genre_average_metaphors(base)[Genre.NOVEL]
        b = genre_average_metaphors(shifted)[Genre.NOVEL]
        assert b == pytest.approx(a + k, abs=0.011)  # both ends independently rounded


class TestSidecar:
    def test_round_trip(self, tmp_path):
        feats = [
            MetaphorFeature("a", 3, MetaphorSource.ANNOTATION),
            MetaphorFeature("b", 0, MetaphorSource.LEXICON_PROXY),
        ]
        path = tmp_path / "metaphor.jsonl"
        write_metaphor_sidecar(feats, path)
        loaded = read_metaphor_sidecar(path)
        assert loaded["a"].count == 3
        assert loaded["b"].source is MetaphorSource.LEXICON_PROXY
