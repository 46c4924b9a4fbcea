"""Turn numeric tables, count tables and text corpora into timelines.

Every reader returns a validated :class:`~surprisal.core.Timeline` whose
vocabulary holds exactly the features with nonzero weight in some bin, in
first-seen order.
"""

from __future__ import annotations

import json
import os
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
import pandas as pd

from .core import MIN_WEIGHT, FeatureVocabulary, SparseDistribution, Timeline, require_valid
from .errors import IngestError

SourceKind = Literal["numeric_table", "count_table", "text_corpus"]
Normalization = Literal["rowsum", "minmax_then_rowsum"]

_WORD = re.compile(r"[^\W\d_]+(?:'[^\W\d_]+)*")
_APOSTROPHES = str.maketrans({"’": "'", "ʼ": "'"})

_LABEL_WORDS = {
    "0": 0, "1": 1, "false": 0, "true": 1, "normal": 0, "attack": 1, "attacked": 1,
    "anomaly": 1, "0.0": 0, "1.0": 1,
}


@dataclass(frozen=True)
class IngestConfig:
    source_kind: SourceKind = "numeric_table"
    normalization: Normalization = "minmax_then_rowsum"
    stopword_path: str | None = None
    label_column: str | None = None
    denominator_column: str | None = None
    bin_label_column: str | None = None
    exclude_columns: tuple[str, ...] = ()

    def __post_init__(self):
        if self.source_kind not in ("numeric_table", "count_table", "text_corpus"):
            raise IngestError(f"unknown source kind {self.source_kind!r}")
        if self.normalization not in ("rowsum", "minmax_then_rowsum"):
            raise IngestError(f"unknown normalization {self.normalization!r}")
        if self.source_kind == "count_table" and self.denominator_column is None \
                and self.normalization != "rowsum":
            raise IngestError("count tables need a denominator column or rowsum normalization")
        object.__setattr__(self, "exclude_columns", tuple(self.exclude_columns))


@dataclass(frozen=True, eq=False)
class IngestResult:
    timeline: Timeline
    labels: np.ndarray | None = None
    dropped_columns: tuple[str, ...] = field(default=())


# --- shared helpers --------------------------------------------------------

def parse_binary_label(value: str, row: int, column: str) -> int:
    key = "".join(str(value).split()).lower()
    if key in _LABEL_WORDS:
        return _LABEL_WORDS[key]
    raise IngestError(f"unrecognized label {value!r}", row, column)


def _timeline_from_matrix(
    weights: np.ndarray, names: Sequence[str], bin_labels: Sequence[str] | None
) -> Timeline:
    """Rows of ``weights`` already sum to 1; drop negligible cells and unused columns."""
    w = np.where(weights >= MIN_WEIGHT, weights, 0.0)
    sums = w.sum(axis=1)
    changed = sums != 1.0
    w[changed] /= sums[changed, None]
    used = np.flatnonzero(w.any(axis=0))
    w = w[:, used]
    vocab = FeatureVocabulary(tuple(names[i] for i in used))
    rows, cols = np.nonzero(w)
    vals = w[rows, cols]
    bounds = np.searchsorted(rows, np.arange(w.shape[0] + 1))
    bins = tuple(
        SparseDistribution(cols[bounds[i]:bounds[i + 1]], vals[bounds[i]:bounds[i + 1]])
        for i in range(w.shape[0])
    )
    t = Timeline(vocab, bins, tuple(bin_labels) if bin_labels is not None else None)
    require_valid(t)
    return t


def _read_frame(source) -> pd.DataFrame:
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise IngestError(f"malformed CSV: {exc}") from exc
    frame.columns = [str(c).strip() for c in frame.columns]
    if frame.shape[0] == 0:
        raise IngestError("table has no data rows")
    return frame


def _require_column(frame: pd.DataFrame, name: str) -> pd.Series:
    if name not in frame.columns:
        raise IngestError(f"missing column {name!r}")
    return frame[name]


def _numeric(frame: pd.DataFrame, columns: Sequence[str]) -> np.ndarray:
    out = np.empty((frame.shape[0], len(columns)), dtype=np.float64)
    for j, col in enumerate(columns):
        raw = frame[col].str.strip()
        vals = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(vals)
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise IngestError(f"non-numeric cell {frame[col].iloc[r]!r}", r, col)
        out[:, j] = vals
    return out


def _split_columns(frame: pd.DataFrame, config: IngestConfig) -> tuple[list[str], np.ndarray | None,
                                                                      list[str] | None]:
    reserved = set(config.exclude_columns)
    labels = bin_labels = None
    if config.label_column is not None:
        col = config.label_column
        labels = np.array([parse_binary_label(v, r, col)
                           for r, v in enumerate(_require_column(frame, col))], dtype=np.int8)
        reserved.add(col)
    if config.bin_label_column is not None:
        bin_labels = [v.strip() for v in _require_column(frame, config.bin_label_column)]
        reserved.add(config.bin_label_column)
    if config.denominator_column is not None:
        _require_column(frame, config.denominator_column)
        reserved.add(config.denominator_column)
    for col in config.exclude_columns:
        _require_column(frame, col)
    features = [c for c in frame.columns if c not in reserved]
    if not features:
        raise IngestError("no feature columns left")
    return features, labels, bin_labels


def _rows_to_unit(x: np.ndarray, what: str) -> np.ndarray:
    sums = x.sum(axis=1)
    zero = np.flatnonzero(sums <= 0)
    if zero.size:
        raise IngestError(f"row has no mass {what}", int(zero[0]))
    return x / sums[:, None]


# --- numeric tables --------------------------------------------------------

def ingest_numeric_table(source, config: IngestConfig | None = None) -> IngestResult:
    """Sensor-style records, one row per bin.

    ``minmax_then_rowsum`` scales each column to [0, 1] over the whole table
    (constant columns are dropped with a warning) and then divides each row
    by its sum. ``rowsum`` divides the raw nonnegative row by its sum.
    """
    config = config or IngestConfig("numeric_table")
    frame = _read_frame(source)
    features, labels, bin_labels = _split_columns(frame, config)
    x = _numeric(frame, features)
    dropped: list[str] = []

    if config.normalization == "minmax_then_rowsum":
        lo, hi = x.min(axis=0), x.max(axis=0)
        constant = hi == lo
        if constant.any():
            dropped = [features[j] for j in np.flatnonzero(constant)]
            msg = f"dropping {len(dropped)} constant column(s): {', '.join(dropped)}"
            warnings.warn(msg, stacklevel=2)
        keep = ~constant
        if not keep.any():
            raise IngestError("every feature column is constant")
        features = [f for f, k in zip(features, keep) if k]
        x = (x[:, keep] - lo[keep]) / (hi[keep] - lo[keep])
        w = _rows_to_unit(x, "after min-max scaling (all features at their minimum)")
    else:
        neg = np.argwhere(x < 0)
        if neg.size:
            r, c = neg[0]
            raise IngestError("negative value under rowsum normalization", int(r), features[c])
        w = _rows_to_unit(x, "(all features zero)")
    return IngestResult(_timeline_from_matrix(w, features, bin_labels), labels, tuple(dropped))


# --- count tables ----------------------------------------------------------

def ingest_count_table(source, config: IngestConfig | None = None) -> IngestResult:
    """Event counts per bin (e.g. deaths per cause per year).

    With a denominator column each count becomes a proportion of that row's
    denominator before the row is renormalized to sum to one.
    """
    config = config or IngestConfig("count_table", normalization="rowsum")
    frame = _read_frame(source)
    features, labels, bin_labels = _split_columns(frame, config)
    x = _numeric(frame, features)
    neg = np.argwhere(x < 0)
    if neg.size:
        r, c = neg[0]
        raise IngestError("negative count", int(r), features[c])
    if config.denominator_column is not None:
        den = _numeric(frame, [config.denominator_column])[:, 0]
        bad = np.flatnonzero(den <= 0)
        if bad.size:
            raise IngestError("denominator must be positive", int(bad[0]), config.denominator_column)
        x = x / den[:, None]
    w = _rows_to_unit(x, "(all counts zero)")
    return IngestResult(_timeline_from_matrix(w, features, bin_labels), labels, ())


# --- text corpora ----------------------------------------------------------

def tokenize(text: str) -> list[str]:
    """Lowercased runs of letters; apostrophes survive only inside words."""
    return _WORD.findall(text.translate(_APOSTROPHES).lower())


def load_stopwords(path: str | os.PathLike | None) -> frozenset[str]:
    if path is None:
        return frozenset()
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        w = line.strip().lower()
        if w and not w.startswith("#"):
            words.add(w.translate(_APOSTROPHES))
    return frozenset(words)


def ingest_text_corpus(
    documents: Mapping[str, str | Sequence[str | Sequence[str]]],
    config: IngestConfig | None = None,
    stopwords: Iterable[str] | None = None,
) -> IngestResult:
    """Relative term frequencies per bin, bins in mapping order.

    Each mapping value is a raw text or a list of documents for that bin. A
    document is raw text (tokenized, stopwords removed) or a list/tuple of
    already filtered tokens, which is counted as given.
    """
    config = config or IngestConfig("text_corpus")
    stop = frozenset(stopwords) if stopwords is not None else load_stopwords(config.stopword_path)
    if not documents:
        raise IngestError("corpus has no bins")

    vocab_index: dict[str, int] = {}
    bins = []
    labels = []
    for label, docs in documents.items():
        if isinstance(docs, str):
            docs = [docs]
        counts: Counter[str] = Counter()
        for doc in docs:
            if isinstance(doc, str):
                counts.update(tok for tok in tokenize(doc) if tok not in stop)
            else:
                counts.update(doc)
        if not counts:
            raise IngestError(f"bin {label!r} is empty after filtering")
        ids, weights = [], []
        total = sum(counts.values())
        for term, c in counts.items():
            if term not in vocab_index:
                vocab_index[term] = len(vocab_index)
            ids.append(vocab_index[term])
            weights.append(c / total)
        bins.append(SparseDistribution.from_weights(ids, weights))
        labels.append(str(label))
    t = Timeline(FeatureVocabulary(tuple(vocab_index)), tuple(bins), tuple(labels))
    require_valid(t)
    return IngestResult(t)


def _label_key(label: str):
    return (0, int(label), "") if label.isdigit() else (1, 0, label)


def read_corpus_dir(directory: str | os.PathLike) -> dict[str, list[str]]:
    """``<label>.txt`` files, ordered by label (numerically when all digits)."""
    d = Path(directory)
    files = sorted(d.glob("*.txt"), key=lambda p: _label_key(p.stem))
    if not files:
        raise IngestError(f"no .txt documents in {d}")
    return {p.stem: [p.read_text(encoding="utf-8")] for p in files}


def read_corpus_jsonl(path: str | os.PathLike) -> dict[str, list]:
    """JSON lines with ``label`` plus ``text`` or ``tokens``; grouped by label."""
    out: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for r, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"bad JSON: {exc.msg}", r) from exc
            if "label" not in rec or not ("text" in rec or "tokens" in rec):
                raise IngestError("record needs 'label' and 'text' or 'tokens'", r)
            doc = rec["text"] if "text" in rec else [str(t) for t in rec["tokens"]]
            out.setdefault(str(rec["label"]), []).append(doc)
    if not out:
        raise IngestError(f"no records in {path}")
    return out


def ingest(path: str | os.PathLike, config: IngestConfig) -> IngestResult:
    """Dispatch on ``config.source_kind``."""
    if config.source_kind == "numeric_table":
        return ingest_numeric_table(path, config)
    if config.source_kind == "count_table":
        return ingest_count_table(path, config)
    p = Path(path)
    docs = read_corpus_dir(p) if p.is_dir() else read_corpus_jsonl(p)
    return ingest_text_corpus(docs, config)


# --- supervised labels -----------------------------------------------------

def read_labels(path: str | os.PathLike) -> np.ndarray:
    """``bin_index,label`` CSV -> dense 0/1 array ordered by bin index."""
    frame = _read_frame(path)
    _require_column(frame, "bin_index")
    lab_col = _require_column(frame, "label")
    idx = _numeric(frame, ["bin_index"])[:, 0].astype(np.int64)
    if np.unique(idx).size != idx.size:
        raise IngestError("duplicate bin_index in labels")
    order = np.argsort(idx)
    if not np.array_equal(idx[order], np.arange(idx.size)):
        raise IngestError("labels must cover bin indices 0..N-1 exactly")
    vals = np.array([parse_binary_label(v, r, "label") for r, v in enumerate(lab_col)], dtype=np.int8)
    return vals[order]


def write_labels(labels: Sequence[int], path: str | os.PathLike) -> None:
    pd.DataFrame({"bin_index": np.arange(len(labels)), "label": np.asarray(labels, dtype=int)}) \
        .to_csv(path, index=False, lineterminator="\n")
