"""Divergence-as-anomaly-score evaluation against binary labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from ..errors import SurprisalError, UndefinedAUCError

# |P - R| and F1 values closer than this are treated as ties
_TIE_TOL = 1e-12


def as_binary_labels(labels: Sequence[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise SurprisalError("labels must be one-dimensional")
    if arr.dtype == bool:
        return arr.astype(np.int8)
    if arr.size and not np.all(np.isin(arr, (0, 1))):
        raise SurprisalError("labels must be 0 or 1")
    return arr.astype(np.int8)


def _paired(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = as_binary_labels(labels)
    if s.size != y.size:
        raise SurprisalError(f"{s.size} scores but {y.size} labels")
    if s.size == 0:
        raise SurprisalError("no scores")
    if not np.all(np.isfinite(s)):
        raise SurprisalError("scores must be finite")
    return s, y


class ScoredBin(NamedTuple):
    bin_index: int
    score: float
    label: int | None


@dataclass(frozen=True, eq=False)
class ScoredSeries:
    """Per-bin anomaly scores; a higher score means more anomalous."""

    scores: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.scores.size)

    def __iter__(self) -> Iterator[ScoredBin]:
        for i, s in enumerate(self.scores.tolist()):
            yield ScoredBin(i, s, None if self.labels is None else int(self.labels[i]))


def anomaly_scores(divergences: Sequence[float], labels: Sequence[int] | None = None) -> ScoredSeries:
    scores = np.asarray(divergences, dtype=np.float64).reshape(-1)
    if labels is None:
        return ScoredSeries(scores)
    y = as_binary_labels(labels)
    if y.size != scores.size:
        raise SurprisalError(f"{scores.size} divergences but {y.size} labels")
    return ScoredSeries(scores, y)


class Confusion(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class EvaluationReport:
    confusion: Confusion
    precision: float
    recall: float
    f1: float
    accuracy: float
    auc: float | None
    threshold: float

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion._asdict(),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "threshold": self.threshold,
        }


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def auc_score(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties ½)."""
    s, y = _paired(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC undefined: labels contain a single class")
    ranks = rankdata(s)  # average ranks for ties
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(scores, labels, threshold: float, strict: bool = True) -> EvaluationReport:
    """Confusion and metrics with ``score >= threshold`` predicted anomalous.

    With a single class present AUC is undefined: ``strict`` raises
    :class:`UndefinedAUCError` (the other metrics ride on ``exc.report``),
    otherwise ``auc`` is ``None``.
    """
    s, y = _paired(scores, labels)
    pred = s >= threshold
    pos = y == 1
    tp = int(np.count_nonzero(pred & pos))
    fp = int(np.count_nonzero(pred & ~pos))
    fn = int(np.count_nonzero(~pred & pos))
    tn = int(y.size - tp - fp - fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    try:
        auc = auc_score(s, y)
    except UndefinedAUCError:
        auc = None
    report = EvaluationReport(
        Confusion(tp, fp, tn, fn), precision, recall, _f1(precision, recall),
        (tp + tn) / y.size, auc, float(threshold),
    )
    if auc is None and strict:
        raise UndefinedAUCError("AUC undefined: labels contain a single class", report)
    return report


@dataclass(frozen=True)
class CutoffCurve:
    """Precision and recall at every distinct score, cutoffs descending."""

    cutoffs: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    @property
    def f1(self) -> np.ndarray:
        p, r = self.precision, self.recall
        denom = p + r
        return np.divide(2 * p * r, denom, out=np.zeros_like(denom), where=denom > 0)


def cutoff_curve(scores, labels) -> CutoffCurve:
    s, y = _paired(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    tp = np.cumsum(y[order], dtype=np.int64)
    # last position of each run of equal scores
    ends = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    tp_at = tp[ends].astype(np.float64)
    predicted = (ends + 1).astype(np.float64)
    n_pos = float(y.sum())
    recall = tp_at / n_pos if n_pos else np.zeros_like(tp_at)
    return CutoffCurve(s_sorted[ends], tp_at / predicted, recall)


def break_even_threshold(scores, labels) -> float:
    """Cutoff where precision and recall are closest.

    Candidates are the distinct score values. Ties on ``|P - R|`` go to the
    higher F1, then to the lower cutoff.
    """
    s, y = _paired(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise SurprisalError("break-even threshold needs both classes in the labels")
    curve = cutoff_curve(s, y)
    gap = np.abs(curve.precision - curve.recall)
    f1 = curve.f1
    cand = gap <= gap.min() + _TIE_TOL
    cand &= f1 >= f1[cand].max() - _TIE_TOL
    return float(curve.cutoffs[cand].min())


@dataclass(frozen=True)
class SensitivityRow:
    offset: float
    report: EvaluationReport


def threshold_sensitivity(
    scores, labels, base_threshold: float, offsets: Sequence[float] = (-0.10, -0.05, 0.0, 0.05, 0.10)
) -> list[SensitivityRow]:
    """Re-evaluate at ``base * (1 + offset)`` for each offset, in order."""
    return [
        SensitivityRow(float(off), evaluate(scores, labels, base_threshold * (1.0 + off)))
        for off in offsets
    ]
