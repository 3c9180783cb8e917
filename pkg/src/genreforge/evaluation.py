"""Per-class F1 pairs, cross-language macro averages, delta tables, PCA, and plot data.

Conventions stated once and used everywhere: any 0/0 precision, recall, or F1
is defined as 0; macro averages are the mean over languages of the pair mean;
delta-table cells carry whole-percentage-point deltas plus one improve/decline
flag per cell derived from the deltas of magnitude >= 2 points (no flag when
they disagree in sign).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class LengthMismatch(ValueError):
    pass


class KeyMismatch(ValueError):
    pass


class DegenerateRank(UserWarning):
    """Fewer nonzero covariance eigenvalues than requested components."""


class IoFailure(OSError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_for_class(preds: Sequence[int], labels: Sequence[int], cls: int) -> ConfusionCounts:
    tp = fp = fn = tn = 0
    for p, t in zip(preds, labels):
        if p == cls and t == cls:
            tp += 1
        elif p == cls and t != cls:
            fp += 1
        elif p != cls and t == cls:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def f1_from_counts(c: ConfusionCounts) -> float:
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_pair(preds: Sequence[int], labels: Sequence[int]) -> tuple[float, float]:
    """(F1 of class 0, F1 of class 1); 0/0 forms are 0 by convention."""
    if len(preds) != len(labels):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(labels)} labels")
    if len(preds) == 0:
        raise LengthMismatch("need at least one prediction")
    return (
        f1_from_counts(confusion_for_class(preds, labels, 0)),
        f1_from_counts(confusion_for_class(preds, labels, 1)),
    )


def support_pair(labels: Sequence[int]) -> tuple[int, int]:
    labels = list(labels)
    return labels.count(0), labels.count(1)


@dataclass(frozen=True)
class MacroSummary:
    task: str
    model: str
    macro: float
    genre_means: tuple[float, float]


def macro_average(
    pairs: Mapping[str, tuple[float, float]], task: str, model: str
) -> MacroSummary:
    """Mean over languages of the pair mean, plus per-genre means."""
    if not pairs:
        raise ValueError("need at least one language")
    xs = [x for x, _ in pairs.values()]
    ys = [y for _, y in pairs.values()]
    mean_x = sum(xs) / len(xs)
    mean_y = sum(ys) / len(ys)
    return MacroSummary(
        task=task, model=model, macro=(mean_x + mean_y) / 2.0, genre_means=(mean_x, mean_y)
    )


# ---------------------------------------------------------------------------
# Delta tables

@dataclass(frozen=True)
class DeltaRow:
    task: str
    model: str
    baseline_means: tuple[float, float]
    augmented_means: tuple[float, float]
    deltas_pp: tuple[int, int]
    highlight: str | None  # "improve" | "decline" | None


def _round_pp(delta: float) -> int:
    scaled = delta * 100.0
    return int(math.floor(scaled + 0.5)) if scaled >= 0 else -int(math.floor(-scaled + 0.5))


def _highlight(dx: int, dy: int) -> str | None:
    big = [d for d in (dx, dy) if abs(d) >= 2]
    if not big:
        return None
    if all(d > 0 for d in big):
        return "improve"
    if all(d < 0 for d in big):
        return "decline"
    return None


def delta_table(
    baseline: Iterable[MacroSummary], augmented: Iterable[MacroSummary]
) -> list[DeltaRow]:
    """Per (task, model) cell: augmented means, whole-point deltas, highlight flag."""
    base = {(s.task, s.model): s for s in baseline}
    aug = {(s.task, s.model): s for s in augmented}
    if set(base) != set(aug):
        missing = set(base) ^ set(aug)
        raise KeyMismatch(f"(task, model) keys differ: {sorted(missing)}")
    rows = []
    for key in sorted(base):
        b, a = base[key], aug[key]
        dx = _round_pp(a.genre_means[0] - b.genre_means[0])
        dy = _round_pp(a.genre_means[1] - b.genre_means[1])
        rows.append(
            DeltaRow(
                task=b.task,
                model=b.model,
                baseline_means=b.genre_means,
                augmented_means=a.genre_means,
                deltas_pp=(dx, dy),
                highlight=_highlight(dx, dy),
            )
        )
    return rows


def _fmt_delta(d: int) -> str:
    return "--" if d == 0 else f"{d:+d}%"


def render_delta_markdown(sections: Sequence[tuple[str, Sequence[DeltaRow]]]) -> str:
    lines = ["| Feature | Set | Model | F1 pair | Delta | Flag |", "| --- | --- | --- | --- | --- | --- |"]
    for feature_name, rows in sections:
        for row in rows:
            ax, ay = row.augmented_means
            dx, dy = row.deltas_pp
            lines.append(
                f"| {feature_name} | {row.task} | {row.model} "
                f"| {ax:.2f} / {ay:.2f} | {_fmt_delta(dx)} / {_fmt_delta(dy)} "
                f"| {row.highlight or ''} |"
            )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# PCA via deflated power iteration

_PCA_TOL = 1e-10
_PCA_MAX_ITER = 10_000
_PCA_SEED = 0x9E3779B9


def _power_iteration(A: np.ndarray, component_index: int) -> np.ndarray | None:
    """Dominant eigenvector of a PSD matrix.

    Stops when the estimated remaining eigenvector error drops below the
    tolerance: with geometric convergence the error after an iterate step of
    size d and ratio r is about d * r / (1 - r), so the raw step size alone
    under-reports the error when the top eigenvalues are close.
    """
    rng = np.random.default_rng([_PCA_SEED, component_index])
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    prev_diff = None
    for _ in range(_PCA_MAX_ITER):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw < 1e-300:
            return None
        w /= nw
        diff = float(np.linalg.norm(w - v))
        v = w
        if diff == 0.0:
            return v
        if prev_diff is not None and prev_diff > 0:
            ratio = diff / prev_diff
            if ratio < 1.0 and diff * ratio / (1.0 - ratio) < _PCA_TOL:
                return v
        prev_diff = diff
    return v


def pca_project(matrix: np.ndarray, k: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Top-k principal component projection of an n x p matrix.

    Covariance uses the 1/(n-1) convention; each component's
    largest-magnitude loading is made positive.  If fewer than k nonzero
    eigenvalues exist, the available components are returned with a
    DegenerateRank warning.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need an n x p matrix with n >= 2")
    n, p = X.shape
    if p < k:
        raise ValueError(f"k={k} exceeds column count {p}")
    Xc = X - X.mean(axis=0)
    C = (Xc.T @ Xc) / (n - 1)
    zero_floor = max(1e-12, 1e-12 * float(np.trace(C)))

    components: list[np.ndarray] = []
    variances: list[float] = []
    A = C.copy()
    for j in range(k):
        v = _power_iteration(A, j)
        eigval = float(v @ A @ v) if v is not None else 0.0
        if v is None or eigval <= zero_floor:
            warnings.warn(
                f"only {len(components)} nonzero components available (requested {k})",
                DegenerateRank,
            )
            break
        i = int(np.argmax(np.abs(v)))
        if v[i] < 0:
            v = -v
        components.append(v)
        variances.append(eigval)
        A = A - eigval * np.outer(v, v)

    if not components:
        return np.zeros((n, 0)), np.zeros(0)
    V = np.stack(components, axis=1)
    return Xc @ V, np.array(variances)


# ---------------------------------------------------------------------------
# Scatter data and plot artifacts

def scatter_data(records: Iterable[tuple[str, object, object]]) -> list[tuple[float, float, str]]:
    """(x, y, genre) rows from (sentence_id, SyntaxFeature, Genre), ordered by id."""
    from .syntax import log_plot_coords

    rows = []
    for sid, feat, genre in sorted(records, key=lambda r: r[0]):
        x, y = log_plot_coords(feat)
        rows.append((x, y, getattr(genre, "value", str(genre))))
    return rows


GENRE_COLORS = {"Novel": "#2e8b57", "Poetry": "#1f77b4", "Drama": "#d62728"}
_VIEW_W, _VIEW_H = 800, 600
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 150, 30, 60


def _svg_scatter(rows: Sequence[tuple[float, float, str]], x_label: str, y_label: str) -> str:
    if rows:
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        x_min, x_max = min(xs), max(xs)
        y_min, y_max = min(ys), max(ys)
    else:
        x_min, x_max, y_min, y_max = 0.0, 1.0, 0.0, 1.0
    if x_max == x_min:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    if y_max == y_min:
        y_min, y_max = y_min - 0.5, y_max + 0.5
    x_pad = 0.05 * (x_max - x_min)
    y_pad = 0.05 * (y_max - y_min)
    x_min, x_max = x_min - x_pad, x_max + x_pad
    y_min, y_max = y_min - y_pad, y_max + y_pad

    plot_w = _VIEW_W - _MARGIN_L - _MARGIN_R
    plot_h = _VIEW_H - _MARGIN_T - _MARGIN_B

    def px(x: float) -> float:
        return _MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w

    def py(y: float) -> float:
        return _MARGIN_T + (y_max - y) / (y_max - y_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_VIEW_W} {_VIEW_H}">',
        f'<rect x="0" y="0" width="{_VIEW_W}" height="{_VIEW_H}" fill="white"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T + plot_h}" x2="{_MARGIN_L + plot_w}" '
        f'y2="{_MARGIN_T + plot_h}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_MARGIN_T + plot_h}" stroke="black"/>',
    ]
    n_ticks = 5
    for i in range(n_ticks):
        fx = x_min + (x_max - x_min) * i / (n_ticks - 1)
        fy = y_min + (y_max - y_min) * i / (n_ticks - 1)
        tx, ty = px(fx), py(fy)
        parts.append(
            f'<line x1="{tx:.1f}" y1="{_MARGIN_T + plot_h}" x2="{tx:.1f}" '
            f'y2="{_MARGIN_T + plot_h + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{tx:.1f}" y="{_MARGIN_T + plot_h + 20}" font-size="11" '
            f'text-anchor="middle">{fx:.2f}</text>'
        )
        parts.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{ty:.1f}" x2="{_MARGIN_L}" y2="{ty:.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{ty + 4:.1f}" font-size="11" '
            f'text-anchor="end">{fy:.2f}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_VIEW_H - 15}" font-size="13" '
        f'text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{_MARGIN_T + plot_h / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.1f})">{y_label}</text>'
    )
    for x, y, genre in rows:
        color = GENRE_COLORS.get(genre, "#555555")
        parts.append(
            f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}" fill-opacity="0.7"/>'
        )
    # Legend swatches are rects so circle elements count the data points.
    legend_y = _MARGIN_T + 10
    for genre, color in GENRE_COLORS.items():
        lx = _MARGIN_L + plot_w + 20
        parts.append(f'<rect x="{lx}" y="{legend_y - 10}" width="12" height="12" fill="{color}"/>')
        parts.append(f'<text x="{lx + 18}" y="{legend_y}" font-size="12">{genre}</text>')
        legend_y += 20
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(
    rows: Sequence[tuple[float, float, str]],
    path_prefix: Path,
    x_label: str = "x",
    y_label: str = "y",
) -> tuple[Path, Path]:
    """Write <prefix>.csv and a self-contained <prefix>.svg scatter."""
    prefix = Path(path_prefix)
    csv_path = prefix.with_suffix(".csv")
    svg_path = prefix.with_suffix(".svg")
    try:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "genre"])
        for x, y, genre in rows:
            writer.writerow([repr(float(x)), repr(float(y)), genre])
        csv_path.write_text(buf.getvalue(), encoding="utf-8")
        svg_path.write_text(_svg_scatter(rows, x_label, y_label), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write plot files at {prefix}: {exc}") from exc
    return csv_path, svg_path


def read_plot_csv(path: Path) -> list[tuple[float, float, str]]:
    rows = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return rows
        for x, y, genre in reader:
            rows.append((float(x), float(y), genre))
    return rows
