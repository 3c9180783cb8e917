"""Deterministic sentence vectorizer plus explicit-feature concatenation.

Sentences become signed hashed character n-gram count vectors (seeded
blake2b, so identical across processes and platforms).  Explicit feature
blocks are appended in a fixed order - syntax [z(depth), z(ratio)], metaphor
[z(count)], then the padded metre bits - and the resulting block layout is
carried on every input vector and stored in trained models.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metaphor import MetaphorFeature
from .metre import MetrePattern, pad_patterns
from .syntax import SyntaxFeature

FEATURE_KINDS = ("syntax", "metaphor", "metre")

_STD_FLOOR = 1e-6


class MissingFeature(KeyError):
    """A requested feature kind is absent for a sentence."""


class MissingStats(ValueError):
    """Feature statistics needed for z-scoring (or padding) are unavailable."""


@dataclass(frozen=True)
class EncoderConfig:
    ngram_min: int = 2
    ngram_max: int = 4
    dim: int = 4096
    hash_seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if not (1 <= self.ngram_min <= self.ngram_max <= 6):
            raise ValueError("ngram range must satisfy 1 <= min <= max <= 6")
        if self.dim < 64 or self.dim & (self.dim - 1) != 0:
            raise ValueError("dim must be a power of two >= 64")
        if not 0 <= self.hash_seed < 2**64:
            raise ValueError("hash_seed must fit in u64")

    def to_dict(self) -> dict:
        return {
            "ngram_min": self.ngram_min,
            "ngram_max": self.ngram_max,
            "dim": self.dim,
            "hash_seed": self.hash_seed,
            "normalize": self.normalize,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EncoderConfig":
        return cls(
            ngram_min=int(d.get("ngram_min", 2)),
            ngram_max=int(d.get("ngram_max", 4)),
            dim=int(d.get("dim", 4096)),
            hash_seed=int(d.get("hash_seed", 0)),
            normalize=bool(d.get("normalize", True)),
        )


@dataclass(frozen=True)
class LinguisticFeatures:
    syntax: SyntaxFeature | None = None
    metaphor: MetaphorFeature | None = None
    metre: MetrePattern | None = None


@dataclass(frozen=True)
class FeatureStats:
    """Scalar feature moments (Train split only) plus the metre pad length."""

    depth_mean: float | None = None
    depth_std: float | None = None
    ratio_mean: float | None = None
    ratio_std: float | None = None
    metaphor_mean: float | None = None
    metaphor_std: float | None = None
    pad_len: int | None = None

    def to_dict(self) -> dict:
        return {
            "depth_mean": self.depth_mean,
            "depth_std": self.depth_std,
            "ratio_mean": self.ratio_mean,
            "ratio_std": self.ratio_std,
            "metaphor_mean": self.metaphor_mean,
            "metaphor_std": self.metaphor_std,
            "pad_len": self.pad_len,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureStats":
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class InputVector:
    values: np.ndarray
    layout: tuple[tuple[str, int, int], ...]

    def __len__(self) -> int:
        return len(self.values)


def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


def encode_sentence(text: str, config: EncoderConfig) -> np.ndarray:
    """Signed hashed character n-gram counts, L2-normalized unless disabled."""
    vec = np.zeros(config.dim, dtype=np.float64)
    s = normalize_text(text)
    if not s:
        return vec
    grams: Counter[str] = Counter()
    for n in range(config.ngram_min, config.ngram_max + 1):
        for i in range(len(s) - n + 1):
            grams[s[i : i + n]] += 1
    key = config.hash_seed.to_bytes(8, "little")
    mask = config.dim - 1
    for gram, count in grams.items():
        h = int.from_bytes(
            hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=key).digest(), "little"
        )
        sign = 1.0 if (h >> 63) == 0 else -1.0
        vec[h & mask] += sign * count
    if config.normalize:
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
    return vec


def _moments(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def fit_feature_stats(
    features: Mapping[str, LinguisticFeatures],
    train_ids: Iterable[str],
    kinds: frozenset[str] | set[str],
    pad_len: int | None = None,
) -> FeatureStats:
    """Means/stds over the Train records only.  pad_len is passed through."""
    ids = list(train_ids)
    kwargs: dict = {"pad_len": pad_len}
    if "syntax" in kinds:
        feats = [_require(features, i).syntax for i in ids]
        if any(f is None for f in feats):
            raise MissingFeature("syntax feature missing for a train record")
        kwargs["depth_mean"], kwargs["depth_std"] = _moments([f.depth for f in feats])
        kwargs["ratio_mean"], kwargs["ratio_std"] = _moments([f.ratio for f in feats])
    if "metaphor" in kinds:
        feats = [_require(features, i).metaphor for i in ids]
        if any(f is None for f in feats):
            raise MissingFeature("metaphor feature missing for a train record")
        kwargs["metaphor_mean"], kwargs["metaphor_std"] = _moments([f.count for f in feats])
    return FeatureStats(**kwargs)


def _require(features: Mapping[str, LinguisticFeatures], sid: str) -> LinguisticFeatures:
    feat = features.get(sid)
    if feat is None:
        raise MissingFeature(f"no features for sentence {sid!r}")
    return feat


def _z(x: float, mean: float, std: float) -> float:
    return (x - mean) / max(std, _STD_FLOOR)


def concat_features(
    sentence_vec: np.ndarray,
    features: LinguisticFeatures,
    kinds: frozenset[str] | set[str],
    stats: FeatureStats,
) -> InputVector:
    """Append requested feature blocks to the sentence vector in fixed order."""
    unknown = set(kinds) - set(FEATURE_KINDS)
    if unknown:
        raise ValueError(f"unknown feature kinds: {sorted(unknown)}")
    blocks: list[tuple[str, np.ndarray]] = [("sentence", np.asarray(sentence_vec, dtype=np.float64))]
    if "syntax" in kinds:
        if features.syntax is None:
            raise MissingFeature("syntax feature requested but absent")
        if stats.depth_mean is None or stats.depth_std is None or stats.ratio_mean is None or stats.ratio_std is None:
            raise MissingStats("syntax stats unavailable")
        blocks.append(
            (
                "syntax",
                np.array(
                    [
                        _z(features.syntax.depth, stats.depth_mean, stats.depth_std),
                        _z(features.syntax.ratio, stats.ratio_mean, stats.ratio_std),
                    ]
                ),
            )
        )
    if "metaphor" in kinds:
        if features.metaphor is None:
            raise MissingFeature("metaphor feature requested but absent")
        if stats.metaphor_mean is None or stats.metaphor_std is None:
            raise MissingStats("metaphor stats unavailable")
        blocks.append(
            ("metaphor", np.array([_z(features.metaphor.count, stats.metaphor_mean, stats.metaphor_std)]))
        )
    if "metre" in kinds:
        if features.metre is None:
            raise MissingFeature("metre pattern requested but absent")
        if stats.pad_len is None:
            raise MissingStats("metre pad length unavailable")
        blocks.append(("metre", pad_patterns([features.metre], stats.pad_len)[0]))

    layout = []
    offset = 0
    for name, arr in blocks:
        layout.append((name, offset, len(arr)))
        offset += len(arr)
    return InputVector(values=np.concatenate([arr for _, arr in blocks]), layout=tuple(layout))


def layout_for(kinds: frozenset[str] | set[str], config: EncoderConfig, stats: FeatureStats):
    """The block layout every InputVector of a run will have."""
    sizes = [("sentence", config.dim)]
    if "syntax" in kinds:
        sizes.append(("syntax", 2))
    if "metaphor" in kinds:
        sizes.append(("metaphor", 1))
    if "metre" in kinds:
        if stats.pad_len is None:
            raise MissingStats("metre pad length unavailable")
        sizes.append(("metre", stats.pad_len))
    layout = []
    offset = 0
    for name, size in sizes:
        layout.append((name, offset, size))
        offset += size
    return tuple(layout)


def encode_records(
    records: Sequence,
    features: Mapping[str, LinguisticFeatures],
    kinds: frozenset[str] | set[str],
    config: EncoderConfig,
    stats: FeatureStats,
) -> np.ndarray:
    """Stacked input matrix for a record sequence (one row per record)."""
    expected = layout_for(kinds, config, stats)
    rows = []
    for rec in records:
        feats = _require(features, rec.sentence_id) if kinds else LinguisticFeatures()
        iv = concat_features(encode_sentence(rec.text, config), feats, kinds, stats)
        if iv.layout != expected:
            raise MissingStats(f"inconsistent layout for {rec.sentence_id!r}")
        rows.append(iv.values)
    if not rows:
        total = sum(size for _, _, size in expected)
        return np.zeros((0, total), dtype=np.float64)
    return np.stack(rows)
