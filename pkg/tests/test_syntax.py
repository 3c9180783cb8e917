import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genreforge.syntax import (
    BadIndex,
    CyclicHeads,
    MalformedLine,
    ParsedSentence,
    SyntaxFeature,
    Token,
    ZeroLength,
    depth_ratio,
    log_plot_coords,
    parse_conllu,
    read_syntax_sidecar,
    serialize_conllu,
    syntax_feature,
    tree_depth,
    write_syntax_sidecar,
)


def line(idx, form, head):
    return "\t".join([str(idx), form, "_", "_", "_", "_", str(head), "_", "_", "_"])


def sentence(sent_id, heads):
    rows = [f"# sent_id = {sent_id}"]
    rows += [line(i + 1, f"w{i + 1}", h) for i, h in enumerate(heads)]
    return "\n".join(rows)


def chain(n):
    return ParsedSentence(
        sentence_id="chain",
        tokens=tuple(Token(i, f"w{i}", i - 1) for i in range(1, n + 1)),
    )


def star(n):
    return ParsedSentence(
        sentence_id="star",
        tokens=tuple(Token(i, f"w{i}", 0 if i == 1 else 1) for i in range(1, n + 1)),
    )


class TestParseConllu:
    def test_single_token(self):
        parsed = parse_conllu(line(1, "word", 0) + "\n")
        assert len(parsed) == 1
        assert parsed[0].tokens == (Token(1, "word", 0),)

    def test_self_head_is_cyclic(self):
        with pytest.raises(CyclicHeads):
            parse_conllu(line(1, "w", 1))

    def test_three_sentence_fixture_ids(self):
        text = "\n\n".join(
            [sentence("alpha", [0]), sentence("beta", [0, 1]), sentence("gamma", [2, 0])]
        )
        parsed = parse_conllu(text)
        assert [p.sentence_id for p in parsed] == ["alpha", "beta", "gamma"]
        assert [len(p.tokens) for p in parsed] == [1, 2, 2]

    def test_synthesized_ids_by_position(self):
        text = line(1, "a", 0) + "\n\n" + line(1, "b", 0)
        parsed = parse_conllu(text)
        assert [p.sentence_id for p in parsed] == ["s1", "s2"]

    def test_multiword_ranges_and_empty_nodes_skipped(self):
        text = "\n".join(
            [
                "# sent_id = mw",
                line("1-2", "della", "_"),
                line(1, "di", 2),
                line(2, "la", 0),
                line("2.1", "ghost", "_"),
            ]
        )
        (parsed,) = parse_conllu(text)
        assert [t.form for t in parsed.tokens] == ["di", "la"]

    def test_wrong_column_count(self):
        with pytest.raises(MalformedLine):
            parse_conllu("1\tword\t0")

    def test_cycle_detected(self):
        with pytest.raises(CyclicHeads):
            parse_conllu(sentence("c", [2, 1]))

    def test_head_out_of_range(self):
        with pytest.raises(BadIndex):
            parse_conllu(sentence("b", [5]))

    def test_bad_index_set(self):
        text = "\n".join([line(1, "a", 0), line(3, "b", 1)])
        with pytest.raises(BadIndex):
            parse_conllu(text)

    def test_round_trip_on_retained_columns(self):
        sentences = [chain(4), star(3)]
        assert parse_conllu(serialize_conllu(sentences)) == sentences


class TestTreeDepth:
    def test_single_token(self):
        assert tree_depth(chain(1)) == 1

    def test_chain_of_three(self):
        # hand-traced: 1 <- 2 <- 3 gives hops 0, 1, 2 from root token 1
        assert tree_depth(chain(3)) == 3

    def test_root_with_two_children(self):
        assert tree_depth(star(3)) == 2

    def test_multi_root_takes_max(self):
        parsed = ParsedSentence(
            sentence_id="forest",
            tokens=(Token(1, "a", 0), Token(2, "b", 0), Token(3, "c", 2), Token(4, "d", 3)),
        )
        assert tree_depth(parsed) == 3

    @given(n=st.integers(1, 40))
    @settings(max_examples=30, deadline=None)
    def test_chain_property(self, n):
        assert tree_depth(chain(n)) == n

    @given(n=st.integers(2, 40))
    @settings(max_examples=30, deadline=None)
    def test_star_property(self, n):
        assert tree_depth(star(n)) == 2

    @given(data=st.data(), n=st.integers(1, 25))
    @settings(max_examples=60, deadline=None)
    def test_depth_at_most_length_on_random_forests(self, data, n):
        heads = [data.draw(st.integers(0, i - 1)) for i in range(1, n + 1)]
        parsed = ParsedSentence(
            sentence_id="r", tokens=tuple(Token(i + 1, f"w{i}", h) for i, h in enumerate(heads))
        )
        feat = syntax_feature(parsed)
        assert 1 <= feat.depth <= feat.length == n
        assert feat.ratio == feat.depth / feat.length


class TestDepthRatio:
    def test_unit(self):
        assert depth_ratio(1, 1) == 1.0

    def test_exact_division(self):
        assert depth_ratio(3, 6) == 0.5

    def test_rational(self):
        assert depth_ratio(5, 13) == pytest.approx(5 / 13, abs=0)
        assert abs(depth_ratio(5, 13) - 0.384615384615) < 1e-9

    def test_zero_length(self):
        with pytest.raises(ZeroLength):
            depth_ratio(1, 0)


class TestLogPlotCoords:
    def test_log_of_one(self):
        x, y = log_plot_coords(SyntaxFeature(depth=1, length=1, ratio=1.0))
        assert x == 0.0
        assert y == pytest.approx(math.log(2), abs=1e-12)

    def test_depth_two_ratio_one(self):
        x, y = log_plot_coords(SyntaxFeature(depth=2, length=2, ratio=1.0))
        assert (x, y) == (0.0, pytest.approx(math.log(3), abs=1e-12))

    def test_calculator_oracle(self):
        feat = SyntaxFeature.from_depth_length(4, 10)
        x, y = log_plot_coords(feat)
        assert x == pytest.approx(-0.916290731874155, abs=1e-12)
        assert y == pytest.approx(1.6094379124341003, abs=1e-12)

    @given(
        d1=st.integers(1, 30), l1=st.integers(1, 60),
        d2=st.integers(1, 30), l2=st.integers(1, 60),
    )
    @settings(max_examples=60, deadline=None)
    def test_strictly_monotone(self, d1, l1, d2, l2):
        f1 = SyntaxFeature.from_depth_length(min(d1, l1), l1)
        f2 = SyntaxFeature.from_depth_length(min(d2, l2), l2)
        x1, y1 = log_plot_coords(f1)
        x2, y2 = log_plot_coords(f2)
        if f1.ratio < f2.ratio:
            assert x1 < x2
        elif f1.ratio > f2.ratio:
            assert x1 > x2
        if f1.depth < f2.depth:
            assert y1 < y2


class TestSidecar:
    def test_round_trip(self, tmp_path):
        feats = {"a": SyntaxFeature.from_depth_length(3, 9), "b": SyntaxFeature.from_depth_length(2, 2)}
        path = tmp_path / "syntax.jsonl"
        written = write_syntax_sidecar(feats, ["a", "b", "missing"], path)
        assert written == 2
        assert read_syntax_sidecar(path) == feats
