"""Dependency-parse ingestion and the (depth, depth-to-length ratio) feature pair.

Depth is defined over dependency forests read from CoNLL-U files: 1 plus the
longest hop count from any token to its root, so a single token has depth 1
and a chain of n tokens has depth n.  Multi-root sentences take the max over
roots.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple


class MalformedLine(ValueError):
    """A CoNLL-U body line does not have the expected 10 columns."""


class CyclicHeads(ValueError):
    """The head graph contains a cycle."""


class BadIndex(ValueError):
    """A head index is out of range or token indices are not 1..n."""


class ZeroLength(ValueError):
    pass


class Token(NamedTuple):
    index: int
    form: str
    head: int


@dataclass(frozen=True)
class ParsedSentence:
    sentence_id: str
    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class SyntaxFeature:
    depth: int
    length: int
    ratio: float

    @classmethod
    def from_depth_length(cls, depth: int, length: int) -> "SyntaxFeature":
        return cls(depth=depth, length=length, ratio=depth_ratio(depth, length))


def _validate(sentence_id: str, tokens: list[Token], line_no: int) -> ParsedSentence:
    n = len(tokens)
    indices = [t.index for t in tokens]
    if indices != list(range(1, n + 1)):
        raise BadIndex(f"sentence {sentence_id!r}: token ids are not exactly 1..{n}")
    heads = {t.index: t.head for t in tokens}
    for t in tokens:
        if not 0 <= t.head <= n:
            raise BadIndex(
                f"sentence {sentence_id!r}: head {t.head} out of range 0..{n} (line {line_no})"
            )
        if t.head == t.index:
            raise CyclicHeads(f"sentence {sentence_id!r}: token {t.index} is its own head")
    # Walk every token to a root, coloring visited nodes to detect cycles.
    state = {i: 0 for i in heads}  # 0 unseen, 1 in progress, 2 done
    for start in heads:
        if state[start] == 2:
            continue
        path = []
        node = start
        while node != 0 and state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node]
        if node != 0 and state[node] == 1:
            raise CyclicHeads(f"sentence {sentence_id!r}: cycle through token {node}")
        for p in path:
            state[p] = 2
    return ParsedSentence(sentence_id=sentence_id, tokens=tuple(tokens))


def parse_conllu(text: str) -> list[ParsedSentence]:
    """Parse CoNLL-U text into validated sentences.

    Multiword-token ranges ("3-4") and empty nodes ("5.1") are skipped.  The
    sentence id comes from a `# sent_id =` comment, or is synthesized from
    the sentence's position in the file.
    """
    sentences: list[ParsedSentence] = []
    tokens: list[Token] = []
    sent_id: str | None = None
    position = 0
    saw_content = False

    def flush(line_no: int) -> None:
        nonlocal tokens, sent_id, position, saw_content
        if not saw_content:
            return
        position += 1
        sid = sent_id if sent_id is not None else f"s{position}"
        sentences.append(_validate(sid, tokens, line_no))
        tokens = []
        sent_id = None
        saw_content = False

    for line_no, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped:
            flush(line_no)
            continue
        if stripped.startswith("#"):
            saw_content = True
            body = stripped[1:].strip()
            if body.startswith("sent_id"):
                _, _, value = body.partition("=")
                sent_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise MalformedLine(f"line {line_no}: expected 10 columns, got {len(cols)}")
        saw_content = True
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue
        try:
            index = int(tok_id)
            head = int(cols[6])
        except ValueError as exc:
            raise MalformedLine(f"line {line_no}: non-integer id/head field") from exc
        tokens.append(Token(index=index, form=cols[1], head=head))
    flush(line_no + 1 if text else 1)
    return sentences


def serialize_conllu(sentences: Iterable[ParsedSentence]) -> str:
    """Inverse of parse_conllu on the retained columns (id, form, head)."""
    chunks = []
    for sent in sentences:
        lines = [f"# sent_id = {sent.sentence_id}"]
        for tok in sent.tokens:
            lines.append(
                "\t".join(
                    [str(tok.index), tok.form, "_", "_", "_", "_", str(tok.head), "_", "_", "_"]
                )
            )
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + ("\n" if chunks else "")


def tree_depth(parsed: ParsedSentence) -> int:
    """1 + the max hop count from any token to its root."""
    heads = {t.index: t.head for t in parsed.tokens}
    depth: dict[int, int] = {}
    for start in heads:
        chain = []
        node = start
        while node != 0 and node not in depth:
            chain.append(node)
            node = heads[node]
        base = 0 if node == 0 else depth[node]
        for tok in reversed(chain):
            base += 1
            depth[tok] = base
    return max(depth.values())


def depth_ratio(depth: int, length: int) -> float:
    if length == 0:
        raise ZeroLength("sentence length is zero")
    return depth / length


def syntax_feature(parsed: ParsedSentence) -> SyntaxFeature:
    return SyntaxFeature.from_depth_length(tree_depth(parsed), len(parsed.tokens))


def log_plot_coords(feature: SyntaxFeature) -> tuple[float, float]:
    """Log-log scatter coordinates: (ln ratio, ln(depth + 1))."""
    return math.log(feature.ratio), math.log(feature.depth + 1)


# ---------------------------------------------------------------------------
# Sidecar I/O

def read_parse_dir(parse_dir: Path) -> dict[str, SyntaxFeature]:
    """Collect features for every sentence in every .conllu file under a dir."""
    features: dict[str, SyntaxFeature] = {}
    for path in sorted(Path(parse_dir).glob("*.conllu")):
        for sent in parse_conllu(path.read_text(encoding="utf-8")):
            features[sent.sentence_id] = syntax_feature(sent)
    return features


def write_syntax_sidecar(features: dict[str, SyntaxFeature], ids: Iterable[str], path: Path) -> int:
    """Write syntax.jsonl rows for the given ids (in order); returns rows written."""
    written = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for sid in ids:
            feat = features.get(sid)
            if feat is None:
                continue
            fh.write(
                json.dumps(
                    {
                        "sentence_id": sid,
                        "depth": feat.depth,
                        "length": feat.length,
                        "ratio": feat.ratio,
                    }
                )
                + "\n"
            )
            written += 1
    return written


def read_syntax_sidecar(path: Path) -> dict[str, SyntaxFeature]:
    out: dict[str, SyntaxFeature] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            out[d["sentence_id"]] = SyntaxFeature(
                depth=int(d["depth"]), length=int(d["length"]), ratio=float(d["ratio"])
            )
    return out
