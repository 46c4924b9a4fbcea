"""Domain types shared by every stage: vocabularies, sparse bins, timelines.

A timeline is an ordered sequence of bins, each a probability distribution over
a shared feature vocabulary. Distributions are stored sparsely (ids + weights,
ids ascending); absent features have weight zero.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import TimelineError

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-9
# normalized weights below this are treated as absent
MIN_WEIGHT = 1e-12


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FeatureVocabulary:
    """Ordered feature names with the inverse name -> id map."""

    names: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        index: dict[str, int] = {}
        for i, name in enumerate(names):
            index.setdefault(name, i)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FeatureVocabulary) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise TimelineError(f"unknown feature {name!r}") from None


@dataclass(frozen=True, eq=False)
class SparseDistribution:
    """One time bin: positive weights on a subset of feature ids.

    The constructor stores what it is given (sorted by id) so that malformed
    inputs can be reported by :func:`validate_timeline`. Use
    :meth:`from_weights` or :meth:`from_dense` to build a normalized bin.
    """

    ids: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if ids.shape != weights.shape:
            raise TimelineError(
                f"ids and weights differ in length ({ids.size} vs {weights.size})"
            )
        order = np.argsort(ids, kind="stable")
        object.__setattr__(self, "ids", _frozen_array(ids[order], np.int64))
        object.__setattr__(self, "weights", _frozen_array(weights[order], np.float64))

    @classmethod
    def from_weights(cls, ids: Iterable[int], weights: Iterable[float]) -> SparseDistribution:
        """Normalize nonnegative weights to unit sum, dropping negligible ones."""
        ids = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64)
        w = np.asarray(list(weights) if not isinstance(weights, np.ndarray) else weights,
                       dtype=np.float64)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise TimelineError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise TimelineError("bin has no mass")
        w = w / total
        keep = w >= MIN_WEIGHT
        if not keep.all():
            ids, w = ids[keep], w[keep]
            w = w / w.sum()
        return cls(ids, w)

    @classmethod
    def from_dense(cls, vector: Sequence[float]) -> SparseDistribution:
        v = np.asarray(vector, dtype=np.float64)
        nz = np.flatnonzero(v)
        return cls.from_weights(nz, v[nz])

    @property
    def values(self) -> np.ndarray:
        return self.weights

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.ids.tolist())

    def __len__(self) -> int:
        return int(self.ids.size)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, SparseDistribution)
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None  # type: ignore[assignment]

    def get(self, feature_id: int) -> float:
        pos = np.searchsorted(self.ids, feature_id)
        if pos < self.ids.size and self.ids[pos] == feature_id:
            return float(self.weights[pos])
        return 0.0

    def to_dense(self, size: int) -> np.ndarray:
        out = np.zeros(size, dtype=np.float64)
        out[self.ids] = self.weights
        return out


@dataclass(frozen=True, eq=False)
class Timeline:
    """A finalized sequence of bins over one vocabulary."""

    vocabulary: FeatureVocabulary
    bins: tuple[SparseDistribution, ...]
    bin_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(self.bins))
        if self.bin_labels is not None:
            object.__setattr__(self, "bin_labels", tuple(str(x) for x in self.bin_labels))

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def __len__(self) -> int:
        return len(self.bins)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Timeline)
            and self.vocabulary == other.vocabulary
            and self.bin_labels == other.bin_labels
            and len(self.bins) == len(other.bins)
            and all(a == b for a, b in zip(self.bins, other.bins))
        )

    __hash__ = None  # type: ignore[assignment]

    def label(self, i: int) -> str:
        return self.bin_labels[i] if self.bin_labels is not None else str(i)

    @property
    def labels(self) -> tuple[str, ...]:
        if self.bin_labels is not None:
            return self.bin_labels
        return tuple(str(i) for i in range(self.n_bins))

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, ids, weights) concatenation of all bins."""
        lengths = np.fromiter((len(b) for b in self.bins), dtype=np.int64, count=self.n_bins)
        indptr = np.zeros(self.n_bins + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        if self.n_bins:
            ids = np.concatenate([b.ids for b in self.bins])
            weights = np.concatenate([b.weights for b in self.bins])
        else:
            ids = np.zeros(0, dtype=np.int64)
            weights = np.zeros(0, dtype=np.float64)
        return indptr, ids, weights

    def dense(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Dense (bins x features) matrix for bins ``start:stop``."""
        stop = self.n_bins if stop is None else stop
        indptr, ids, weights = self.csr
        lo, hi = indptr[start], indptr[stop]
        out = np.zeros((stop - start, self.n_features), dtype=np.float64)
        rows = np.repeat(np.arange(stop - start), np.diff(indptr[start:stop + 1]))
        out[rows, ids[lo:hi]] = weights[lo:hi]
        return out


@dataclass(frozen=True, eq=False)
class TimelineCenter:
    """Expected distribution: per-feature mean weight over all bins."""

    values: np.ndarray
    n_bins: int

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, np.float64))

    def __len__(self) -> int:
        return int(self.values.size)

    def ranked(self) -> np.ndarray:
        """Feature ids by descending prominence, ties by id ascending."""
        return np.lexsort((np.arange(self.values.size), -self.values))


@dataclass(frozen=True, eq=False)
class SurprisabilityProfile:
    """Signed per-feature surprisal (bits) of one bin against the center.

    ``values`` are positive where the bin over-represents a feature and
    negative where it under-represents it. Features matching the center
    exactly are omitted. ``divergence`` is the bin's total divergence over
    the whole vocabulary and is unaffected by thresholding. ``complete`` is
    False once thresholding has dropped any entry.
    """

    bin_index: int
    ids: np.ndarray
    values: np.ndarray
    divergence: float
    complete: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ids", _frozen_array(self.ids, np.int64))
        object.__setattr__(self, "values", _frozen_array(self.values, np.float64))

    def __len__(self) -> int:
        return int(self.ids.size)

    def get(self, feature_id: int) -> float:
        pos = np.searchsorted(self.ids, feature_id)
        if pos < self.ids.size and self.ids[pos] == feature_id:
            return float(self.values[pos])
        return 0.0

    def to_dense(self, size: int) -> np.ndarray:
        out = np.zeros(size, dtype=np.float64)
        out[self.ids] = self.values
        return out

    def ordered(self) -> np.ndarray:
        """Entry positions by |value| descending, ties by feature id ascending."""
        return np.lexsort((self.ids, -np.abs(self.values)))


@dataclass(frozen=True)
class Violation:
    bin_index: int | None
    feature: str | None
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        where = []
        if self.bin_index is not None:
            where.append(f"bin {self.bin_index}")
        if self.feature is not None:
            where.append(f"feature {self.feature}")
        loc = ", ".join(where) or "timeline"
        return f"{loc}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


def validate_timeline(t: Timeline) -> list[Violation]:
    """Check every type invariant; never raises on bad data."""
    out: list[Violation] = []
    vocab = t.vocabulary
    n_feat = len(vocab)
    if n_feat == 0:
        out.append(Violation(None, None, "empty vocabulary"))
    if len(vocab.index) != n_feat:
        seen: set[str] = set()
        for name in vocab.names:
            if name in seen:
                out.append(Violation(None, name, "duplicate name"))
            seen.add(name)
    if t.n_bins == 0:
        out.append(Violation(None, None, "no bins"))
        return out
    if t.bin_labels is not None and len(t.bin_labels) != t.n_bins:
        out.append(Violation(None, None, "label count",
                             f"{len(t.bin_labels)} labels for {t.n_bins} bins"))

    indptr, ids, weights = t.csr
    owner = np.repeat(np.arange(t.n_bins), np.diff(indptr))

    def name_of(fid: int) -> str:
        return vocab.names[fid] if 0 <= fid < n_feat else f"#{fid}"

    def report(mask: np.ndarray, rule: str):
        for pos in np.flatnonzero(mask):
            out.append(Violation(int(owner[pos]), name_of(int(ids[pos])), rule,
                                 f"weight={weights[pos]!r}"))

    report(~np.isfinite(weights), "non-finite weight")
    report(weights == 0, "zero stored")
    report(weights < 0, "negative weight")
    bad_id = (ids < 0) | (ids >= n_feat)
    for pos in np.flatnonzero(bad_id):
        out.append(Violation(int(owner[pos]), None, "id out of range",
                             f"id={int(ids[pos])}, |vocabulary|={n_feat}"))
    dup = np.zeros(ids.size, dtype=bool)
    if ids.size > 1:
        dup[1:] = (ids[1:] == ids[:-1]) & (owner[1:] == owner[:-1])
    for pos in np.flatnonzero(dup):
        out.append(Violation(int(owner[pos]), name_of(int(ids[pos])), "duplicate id"))

    with np.errstate(invalid="ignore"):
        sums = np.bincount(owner, weights=weights, minlength=t.n_bins)
    for i in np.flatnonzero(~(np.abs(sums - 1.0) <= SUM_TOLERANCE)):
        out.append(Violation(int(i), None, "sum≠1", f"sum={sums[i]!r}"))
    return out


def require_valid(t: Timeline) -> None:
    """Raise TimelineError listing the first few violations, if any."""
    if t.n_bins == 0:
        raise TimelineError("no bins")
    problems = validate_timeline(t)
    if problems:
        shown = "; ".join(str(v) for v in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise TimelineError(f"invalid timeline: {shown}{more}")


def timeline_from_rows(
    names: Sequence[str],
    rows: Iterable[Mapping[str, float]],
    labels: Sequence[str] | None = None,
) -> Timeline:
    """Convenience builder: one name -> weight mapping per bin, normalized."""
    vocab = FeatureVocabulary(tuple(names))
    bins = []
    for row in rows:
        ids = [vocab.id_of(k) for k in row]
        bins.append(SparseDistribution.from_weights(ids, list(row.values())))
    return Timeline(vocab, tuple(bins), tuple(labels) if labels is not None else None)


# --- on-disk format -------------------------------------------------------

VOCAB_FILE = "vocab.txt"
BINS_FILE = "bins.csv"
LABELS_FILE = "labels.txt"


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _check_line_safe(values: Iterable[str], what: str) -> None:
    for v in values:
        if "\n" in v or "\r" in v:
            raise TimelineError(f"{what} {v!r} contains a line break")


def write_timeline(t: Timeline, directory: str | os.PathLike) -> Path:
    """Write ``vocab.txt``, ``bins.csv`` and (if labelled) ``labels.txt``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _check_line_safe(t.vocabulary.names, "feature name")
    atomic_write_text(d / VOCAB_FILE, "".join(f"{n}\n" for n in t.vocabulary.names))

    indptr, ids, weights = t.csr
    frame = pd.DataFrame({
        "bin_index": np.repeat(np.arange(t.n_bins), np.diff(indptr)),
        "feature_id": ids,
        "weight": weights,
    })
    tmp = d / f".{BINS_FILE}.tmp{os.getpid()}"
    frame.to_csv(tmp, index=False, float_format="%.17g", lineterminator="\n")
    os.replace(tmp, d / BINS_FILE)

    labels_path = d / LABELS_FILE
    if t.bin_labels is not None:
        _check_line_safe(t.bin_labels, "bin label")
        atomic_write_text(labels_path, "".join(f"{x}\n" for x in t.bin_labels))
    elif labels_path.exists():
        labels_path.unlink()
    return d


def _read_lines(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def read_timeline(directory: str | os.PathLike) -> Timeline:
    """Read a timeline directory verbatim (weights are not renormalized)."""
    d = Path(directory)
    if not (d / VOCAB_FILE).is_file() or not (d / BINS_FILE).is_file():
        raise TimelineError(f"{d} is not a timeline directory (needs {VOCAB_FILE}, {BINS_FILE})")
    names = _read_lines(d / VOCAB_FILE)
    labels = _read_lines(d / LABELS_FILE) if (d / LABELS_FILE).is_file() else None

    try:
        frame = pd.read_csv(
            d / BINS_FILE,
            dtype={"bin_index": np.int64, "feature_id": np.int64, "weight": np.float64},
            float_precision="round_trip",
        )
    except (ValueError, pd.errors.ParserError) as exc:
        raise TimelineError(f"malformed {BINS_FILE}: {exc}") from exc
    missing = {"bin_index", "feature_id", "weight"} - set(frame.columns)
    if missing:
        raise TimelineError(f"{BINS_FILE} lacks columns {sorted(missing)}")

    bin_idx = frame["bin_index"].to_numpy()
    if bin_idx.size and bin_idx.min() < 0:
        raise TimelineError(f"{BINS_FILE} has a negative bin_index")
    n_bins = int(bin_idx.max()) + 1 if bin_idx.size else 0
    if labels is not None:
        n_bins = max(n_bins, len(labels))
    if n_bins == 0:
        raise TimelineError("no bins")

    order = np.argsort(bin_idx, kind="stable")
    bin_idx = bin_idx[order]
    fids = frame["feature_id"].to_numpy()[order]
    w = frame["weight"].to_numpy()[order]
    bounds = np.searchsorted(bin_idx, np.arange(n_bins + 1))
    bins = tuple(
        SparseDistribution(fids[bounds[i]:bounds[i + 1]], w[bounds[i]:bounds[i + 1]])
        for i in range(n_bins)
    )
    return Timeline(FeatureVocabulary(tuple(names)), bins,
                    tuple(labels) if labels is not None else None)
