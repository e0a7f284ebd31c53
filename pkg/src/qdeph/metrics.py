"""Confusion matrices and the scores derived from them."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["ConfusionMatrix", "Scores", "confusion", "scores", "write_confusion_csv", "confusion_svg"]


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[j, k]`` = number of samples of actual class j predicted as k."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (c < 0).any():
            raise ValueError("negative counts")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def m(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class Scores:
    """Accuracy, per-class ratios and macro-F1.

    ``row_ratio[j] = C_jj / sum_k C_jk`` (over samples whose actual class is j)
    and ``col_ratio[j] = C_jj / sum_i C_ij`` (over samples predicted as j).
    Which of the two is called precision depends on convention, so both are
    kept under neutral names; F1 does not depend on the choice.
    """

    accuracy: float
    row_ratio: np.ndarray
    col_ratio: np.ndarray
    f1: np.ndarray
    macro_f1: float
    zero_row: np.ndarray
    zero_col: np.ndarray

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "f1": self.f1.tolist(),
            "row_ratio": self.row_ratio.tolist(),
            "col_ratio": self.col_ratio.tolist(),
            "conventions": {
                "row_ratio": "C_jj / sum_k C_jk (per actual class; conventional recall)",
                "col_ratio": "C_jj / sum_i C_ij (per predicted class; conventional precision)",
            },
            "zero_support_actual": np.flatnonzero(self.zero_row).tolist(),
            "zero_support_predicted": np.flatnonzero(self.zero_col).tolist(),
        }


def confusion(preds, truth, m: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise ValueError("preds and truth must be 1-d and of equal length")
    if len(preds) == 0:
        raise ValueError("no samples")
    for name, a in (("preds", preds), ("truth", truth)):
        if a.min() < 0 or a.max() >= m:
            raise ValueError(f"{name} label out of range [0, {m})")
    counts = np.zeros((m, m), dtype=np.int64)
    np.add.at(counts, (truth, preds), 1)
    return ConfusionMatrix(counts)


def _ratio(num, den):
    out = np.zeros(len(num))
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def scores(c: ConfusionMatrix) -> Scores:
    counts = c.counts
    if c.total < 1:
        raise ValueError("empty confusion matrix")
    diag = np.diag(counts).astype(float)
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    r = _ratio(diag, rows)
    q = _ratio(diag, cols)
    f1 = _ratio(2 * r * q, r + q)
    return Scores(
        accuracy=float(diag.sum() / c.total),
        row_ratio=r,
        col_ratio=q,
        f1=f1,
        macro_f1=float(f1.mean()),
        zero_row=rows == 0,
        zero_col=cols == 0,
    )


def write_scores_json(s: Scores, path, extra: dict | None = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps({**s.to_json(), **(extra or {})}, indent=2, sort_keys=True) + "\n")
    return path


def write_confusion_csv(c: ConfusionMatrix, class_values, path) -> Path:
    path = Path(path)
    labels = [repr(float(v)) for v in class_values]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["actual\\predicted", *labels])
        for lab, row in zip(labels, c.counts):
            w.writerow([lab, *row.tolist()])
    return path


_LOW = np.array([214, 234, 248])  # light blue
_HIGH = np.array([200, 30, 30])  # red


def confusion_svg(c: ConfusionMatrix, class_values, cell: int = 28) -> str:
    """Heatmap of row-normalised counts, light blue (low) to red (high)."""
    m = c.m
    rows = c.counts.sum(axis=1, keepdims=True)
    frac = np.divide(c.counts, rows, out=np.zeros(c.counts.shape), where=rows > 0)
    pad = 48
    size = pad + m * cell
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 8}" height="{size + 8}" '
        f'font-family="sans-serif" font-size="9">'
    ]
    for j in range(m):
        for k in range(m):
            rgb = np.rint(_LOW + (_HIGH - _LOW) * frac[j, k]).astype(int)
            out.append(
                f'<rect x="{pad + k * cell}" y="{pad + j * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({rgb[0]},{rgb[1]},{rgb[2]})"><title>{c.counts[j, k]}</title></rect>'
            )
    for i, v in enumerate(class_values):
        lab = f"{float(v):.3g}"
        mid = pad + i * cell + cell // 2
        out.append(f'<text x="{mid}" y="{pad - 6}" text-anchor="middle">{lab}</text>')
        out.append(f'<text x="{pad - 6}" y="{mid + 3}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{pad}" y="12">predicted</text>')
    out.append(f'<text x="4" y="{pad - 20}">actual</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
