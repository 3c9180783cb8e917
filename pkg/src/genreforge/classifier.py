"""From-scratch binary classifier: logistic regression or a one-hidden-layer MLP.

Trained by seeded mini-batch gradient descent on binary cross-entropy with an
L2 penalty on the weight matrices (biases excluded).  The decision rule is
strict: label 1 exactly when the predicted probability exceeds 0.5, which is
implemented as logit > 0 so ties at the boundary resolve to 0 even in
floating point.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .encoding import (
    EncoderConfig,
    FeatureStats,
    LinguisticFeatures,
    encode_records,
    fit_feature_stats,
    layout_for,
)
from .metre import default_pad_len

_PROB_CLAMP = 1e-12

MODEL_FORMAT_VERSION = 1


class ShapeMismatch(ValueError):
    pass


class SingleClassTrainSet(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 64
    l2: float = 1e-4
    seed: int = 0
    hidden_dim: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.hidden_dim < 0:
            raise ValueError("hidden_dim must be >= 0")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "l2": self.l2,
            "seed": self.seed,
            "hidden_dim": self.hidden_dim,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        return cls(
            learning_rate=float(d.get("learning_rate", 0.1)),
            epochs=int(d.get("epochs", 20)),
            batch_size=int(d.get("batch_size", 64)),
            l2=float(d.get("l2", 1e-4)),
            seed=int(d.get("seed", 0)),
            hidden_dim=int(d.get("hidden_dim", 0)),
        )


@dataclass
class ClassifierModel:
    layout: tuple[tuple[str, int, int], ...]
    hidden_dim: int
    params: dict[str, np.ndarray]
    threshold: float = 0.5
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return sum(size for _, _, size in self.layout)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_shape(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    width = X.shape[-1] if X.ndim > 0 else 0
    if width != model.input_dim:
        raise ShapeMismatch(f"input width {width} != model layout width {model.input_dim}")
    return X


def logits(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    X = _check_shape(model, X)
    if model.hidden_dim == 0:
        return X @ model.params["w"] + model.params["b"]
    a = np.tanh(X @ model.params["w1"].T + model.params["b1"])
    return a @ model.params["w2"] + model.params["b2"]


def forward(model: ClassifierModel, x: np.ndarray) -> float | np.ndarray:
    """Predicted probability of class 1 (scalar for a single input)."""
    z = logits(model, x)
    p = _sigmoid(np.atleast_1d(z))
    return float(p[0]) if np.ndim(z) == 0 else p


def predict(model: ClassifierModel, x: np.ndarray):
    """1 iff the probability strictly exceeds 0.5 (ties go to 0)."""
    z = logits(model, x)
    labels = (np.atleast_1d(z) > 0).astype(np.int64)
    return int(labels[0]) if np.ndim(z) == 0 else labels


def loss_and_grad(
    model: ClassifierModel, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean BCE + l2 * (sum of squared weights), with analytic gradients."""
    X = _check_shape(model, np.atleast_2d(X))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("batch is empty")
    n = X.shape[0]

    if model.hidden_dim == 0:
        w, b = model.params["w"], model.params["b"]
        z = X @ w + b
        p = _sigmoid(z)
        pc = np.clip(p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
        data_loss = float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))
        loss = data_loss + l2 * float(np.sum(w * w))
        g = (p - y) / n
        grads = {"w": X.T @ g + 2.0 * l2 * w, "b": np.array(np.sum(g))}
        return loss, grads

    w1, b1 = model.params["w1"], model.params["b1"]
    w2, b2 = model.params["w2"], model.params["b2"]
    a = np.tanh(X @ w1.T + b1)
    z = a @ w2 + b2
    p = _sigmoid(z)
    pc = np.clip(p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    data_loss = float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))
    loss = data_loss + l2 * (float(np.sum(w1 * w1)) + float(np.sum(w2 * w2)))
    d2 = (p - y) / n
    d1 = (d2[:, None] * w2[None, :]) * (1.0 - a * a)
    grads = {
        "w1": d1.T @ X + 2.0 * l2 * w1,
        "b1": d1.sum(axis=0),
        "w2": a.T @ d2 + 2.0 * l2 * w2,
        "b2": np.array(np.sum(d2)),
    }
    return loss, grads


def init_params(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform +-1/sqrt(fan_in) weights, zero biases."""
    if hidden_dim == 0:
        bound = 1.0 / np.sqrt(input_dim)
        return {"w": rng.uniform(-bound, bound, size=input_dim), "b": np.array(0.0)}
    bound1 = 1.0 / np.sqrt(input_dim)
    bound2 = 1.0 / np.sqrt(hidden_dim)
    return {
        "w1": rng.uniform(-bound1, bound1, size=(hidden_dim, input_dim)),
        "b1": np.zeros(hidden_dim),
        "w2": rng.uniform(-bound2, bound2, size=hidden_dim),
        "b2": np.array(0.0),
    }


def fit(
    X: np.ndarray,
    y: np.ndarray,
    layout: tuple[tuple[str, int, int], ...],
    config: TrainConfig,
) -> tuple[ClassifierModel, list[float]]:
    """Mini-batch gradient descent; returns (model, per-epoch mean losses)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    classes = set(np.unique(y).tolist())
    if len(classes) < 2:
        raise SingleClassTrainSet(f"train labels contain a single class: {sorted(classes)}")
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    model = ClassifierModel(
        layout=layout,
        hidden_dim=config.hidden_dim,
        params=init_params(X.shape[1], config.hidden_dim, rng),
    )
    log: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = loss_and_grad(model, X[batch], y[batch], config.l2)
            for key, grad in grads.items():
                model.params[key] = model.params[key] - config.learning_rate * grad
            losses.append(loss)
        log.append(float(np.mean(losses)))
    return model, log


def derive_cell_seed(base_seed: int, slug: str) -> int:
    """Stable per-grid-cell training seed."""
    digest = hashlib.blake2b(f"{base_seed}:{slug}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def train_task(
    task,
    features: Mapping[str, LinguisticFeatures],
    encoder_config: EncoderConfig,
    kinds: frozenset[str] | set[str],
    train_config: TrainConfig,
    pad_len: int | None = None,
    model_id: str | None = None,
) -> tuple[ClassifierModel, list[float]]:
    """Encode a pair task's Train split and fit the head.

    Scalar feature statistics are computed on the Train records only; the
    metre pad length defaults to the 95th percentile over all task records
    when not supplied.
    """
    train_ids = [rec.sentence_id for rec in task.train]
    if "metre" in kinds and pad_len is None:
        patterns = []
        for rec in list(task.train) + list(task.test):
            feat = features.get(rec.sentence_id)
            if feat is not None and feat.metre is not None:
                patterns.append(feat.metre)
        pad_len = default_pad_len(patterns)
    stats = fit_feature_stats(features, train_ids, kinds, pad_len=pad_len)
    layout = layout_for(kinds, encoder_config, stats)
    X = encode_records(task.train, features, kinds, encoder_config, stats)
    y = np.array([task.label_of(rec) for rec in task.train], dtype=np.float64)
    model, log = fit(X, y, layout, config=train_config)
    model.meta = {
        "model_id": model_id or f"hashlr-d{encoder_config.dim}",
        "task": task.display,
        "genres": [g.value for g in task.genres],
        "labels": {g.value: lbl for g, lbl in task.labels.items()},
        "language": task.language.value,
        "kinds": sorted(kinds),
        "encoder": encoder_config.to_dict(),
        "train": train_config.to_dict(),
        "feature_stats": stats.to_dict(),
        "training_log": log,
    }
    return model, log


# ---------------------------------------------------------------------------
# Model (de)serialization

def model_to_dict(model: ClassifierModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "layout": [list(block) for block in model.layout],
        "hidden_dim": model.hidden_dim,
        "threshold": model.threshold,
        "params": {k: v.tolist() for k, v in model.params.items()},
        "meta": model.meta,
    }


def model_from_dict(d: Mapping) -> ClassifierModel:
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
    model = ClassifierModel(
        layout=tuple((name, int(start), int(size)) for name, start, size in d["layout"]),
        hidden_dim=int(d["hidden_dim"]),
        params={k: np.array(v, dtype=np.float64) for k, v in d["params"].items()},
        threshold=float(d["threshold"]),
        meta=dict(d.get("meta", {})),
    )
    expected = model.input_dim
    if model.hidden_dim == 0:
        actual = len(model.params["w"])
    else:
        actual = model.params["w1"].shape[1]
    if actual != expected:
        raise ShapeMismatch(f"stored weights ({actual}) do not match layout width ({expected})")
    return model


def save_model(model: ClassifierModel, path: Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path: Path) -> ClassifierModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
