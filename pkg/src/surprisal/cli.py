"""Batch command line: one subcommand per pipeline stage.

Exit codes: 0 success, 1 data error (one JSON line on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import __version__
from .analysis import (
    anomaly_scores,
    break_even_threshold,
    cluster_vs_labels,
    distance_matrix,
    evaluate,
    feature_trajectory,
    kmeans_cluster,
    pairwise_group_distance,
    pca_project,
    scale_for_clustering,
    threshold_sensitivity,
    variability_ranking,
)
from .core import Timeline, atomic_write_text, read_timeline, write_timeline
from .errors import IngestError, SurprisalError
from .ingest import IngestConfig, ingest, read_labels, write_labels
from .transform import ThresholdPolicy, TransformResult, transform_timeline

FLOAT_FORMAT = "%.17g"


@dataclass
class RunManifest:
    command: str
    config_hash: str
    inputs: list[str]
    outputs: list[str]
    seed: int | None
    tool_version: str
    duration_seconds: float


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Run:
    """Collects outputs of one command and writes the manifest last."""

    def __init__(self, args: argparse.Namespace, out_dir: Path, inputs: Sequence[str]):
        self.args = args
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs = [str(p) for p in inputs]
        self.outputs: list[str] = []
        self.started = time.perf_counter()

    def table(self, name: str, frame: pd.DataFrame) -> Path:
        fmt = getattr(self.args, "format", "csv")
        path = self.out_dir / f"{name}.{fmt}"
        tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
        if fmt == "json":
            records = frame.to_dict(orient="records")
            tmp.write_text(json.dumps(records, indent=1, default=_json_default) + "\n",
                           encoding="utf-8")
        else:
            frame.to_csv(tmp, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        os.replace(tmp, path)
        self.outputs.append(str(path))
        return path

    def json(self, name: str, payload) -> Path:
        path = self.out_dir / name
        atomic_write_text(path, json.dumps(payload, indent=2, default=_json_default) + "\n")
        self.outputs.append(str(path))
        return path

    def add_output(self, path: Path | str) -> None:
        self.outputs.append(str(path))

    def finish(self) -> RunManifest:
        # where results land and how many threads made them do not change them
        config = {k: v for k, v in vars(self.args).items()
                  if k not in ("func", "threads", "output")}
        manifest = RunManifest(
            command=self.args.command,
            config_hash=config_hash(config),
            inputs=self.inputs,
            outputs=list(self.outputs),
            seed=getattr(self.args, "seed", None),
            tool_version=__version__,
            duration_seconds=round(time.perf_counter() - self.started, 6),
        )
        atomic_write_text(self.out_dir / "manifest.json",
                          json.dumps(asdict(manifest), indent=2) + "\n")
        return manifest


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _policy(args: argparse.Namespace) -> ThresholdPolicy:
    if getattr(args, "quantile", None) is not None:
        return ThresholdPolicy.quantile(args.quantile)
    return ThresholdPolicy.fixed(args.theta if args.theta is not None else 0.0)


def _load(args: argparse.Namespace, policy: ThresholdPolicy | None = None) -> tuple[Timeline, TransformResult]:
    t = read_timeline(args.timeline)
    result = transform_timeline(t, policy or _policy(args), workers=args.threads)
    return t, result


def parse_offsets(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(float(part[:-1]) / 100 if part.endswith("%") else float(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad offset {part!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("no offsets given")
    return out


# --- commands --------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> None:
    exclude = tuple(c.strip() for group in args.exclude for c in group.split(",") if c.strip())
    normalization = args.normalize
    if normalization is None:
        normalization = "minmax_then_rowsum" if args.kind == "numeric_table" else "rowsum"
    config = IngestConfig(
        source_kind=args.kind,
        normalization=normalization,
        stopword_path=args.stopwords,
        label_column=args.label_column,
        denominator_column=args.denominator,
        bin_label_column=args.bin_label_column,
        exclude_columns=exclude,
    )
    run = Run(args, args.output, [args.input] + ([args.stopwords] if args.stopwords else []))
    result = ingest(args.input, config)
    write_timeline(result.timeline, run.out_dir)
    for name in ("vocab.txt", "bins.csv"):
        run.add_output(run.out_dir / name)
    if result.timeline.bin_labels is not None:
        run.add_output(run.out_dir / "labels.txt")
    if result.labels is not None:
        write_labels(result.labels, run.out_dir / "labels.csv")
        run.add_output(run.out_dir / "labels.csv")
    run.finish()


def sp_frame(t: Timeline, result: TransformResult) -> pd.DataFrame:
    """Rows ordered by bin, then |surprisal| descending, then feature id."""
    profiles = result.profiles
    if not profiles or not any(len(sp) for sp in profiles):
        return pd.DataFrame({"bin_index": pd.Series(dtype=np.int64),
                             "feature_name": pd.Series(dtype=str),
                             "signed_surprisal": pd.Series(dtype=np.float64)})
    bins = np.concatenate([np.full(len(sp), sp.bin_index, dtype=np.int64) for sp in profiles])
    ids = np.concatenate([sp.ids for sp in profiles])
    vals = np.concatenate([sp.values for sp in profiles])
    order = np.lexsort((ids, -np.abs(vals), bins))
    names = np.asarray(t.vocabulary.names, dtype=object)
    return pd.DataFrame({
        "bin_index": bins[order],
        "feature_name": names[ids[order]],
        "signed_surprisal": vals[order],
    })


def cmd_transform(args: argparse.Namespace) -> None:
    run = Run(args, args.output, [args.timeline])
    t, result = _load(args)
    run.table("sp", sp_frame(t, result))
    run.table("divergence", pd.DataFrame({
        "bin_index": np.arange(t.n_bins),
        "label": list(t.labels),
        "divergence": result.divergences,
    }))
    ranked = result.tcr.ranked()
    run.table("tcr", pd.DataFrame({
        "rank": np.arange(1, ranked.size + 1),
        "feature_name": [t.vocabulary.names[i] for i in ranked],
        "value": result.tcr.values[ranked],
    }))
    run.finish()


def _read_scores(path: str) -> np.ndarray:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestError(f"malformed scores file: {exc}") from exc
    column = next((c for c in ("divergence", "score") if c in frame.columns), None)
    if column is None or "bin_index" not in frame.columns:
        raise IngestError("scores file needs bin_index and a divergence or score column")
    idx = frame["bin_index"].to_numpy()
    order = np.argsort(idx, kind="stable")
    if not np.array_equal(idx[order], np.arange(idx.size)):
        raise IngestError("scores must cover bin indices 0..N-1 exactly")
    scores = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=np.float64)[order]
    if not np.all(np.isfinite(scores)):
        raise IngestError("non-numeric score", int(np.flatnonzero(~np.isfinite(scores))[0]), column)
    return scores


def cmd_evaluate(args: argparse.Namespace) -> None:
    run = Run(args, args.output, [args.scores, args.labels])
    scores = _read_scores(args.scores)
    series = anomaly_scores(scores, read_labels(args.labels))
    threshold = args.threshold
    if threshold is None:
        threshold = break_even_threshold(series.scores, series.labels)
    report = evaluate(series.scores, series.labels, threshold)
    run.json("report.json", report.to_dict())
    rows = threshold_sensitivity(series.scores, series.labels, threshold, args.offsets)
    run.table("sensitivity", pd.DataFrame([{
        "offset": r.offset,
        "threshold": r.report.threshold,
        "auc": r.report.auc,
        "f1": r.report.f1,
        "precision": r.report.precision,
        "recall": r.report.recall,
        "accuracy": r.report.accuracy,
        "tp": r.report.confusion.tp,
        "fp": r.report.confusion.fp,
        "tn": r.report.confusion.tn,
        "fn": r.report.confusion.fn,
    } for r in rows]))
    run.finish()


def cmd_rank(args: argparse.Namespace) -> None:
    run = Run(args, args.output, [args.timeline])
    t, result = _load(args, ThresholdPolicy.keep_all())
    ranking = variability_ranking(result.profiles, t.vocabulary)
    run.table("ranking", pd.DataFrame({
        "rank": np.arange(1, len(ranking) + 1),
        "feature": ranking.names(),
        "d_js": ranking.values,
    }))
    run.finish()


def _matrix_frame(labels: Sequence[str], values: np.ndarray) -> pd.DataFrame:
    frame = pd.DataFrame(values, columns=list(labels))
    frame.insert(0, "label", list(labels))
    return frame


def _read_groups(path: str, n_bins: int) -> list[str]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if not {"bin_index", "group"} <= set(frame.columns):
        raise IngestError("groups file needs bin_index and group columns")
    idx = pd.to_numeric(frame["bin_index"], errors="coerce").to_numpy()
    if not np.array_equal(np.sort(idx), np.arange(n_bins)):
        raise IngestError(f"groups must cover bin indices 0..{n_bins - 1} exactly")
    order = np.argsort(idx)
    return [str(g) for g in frame["group"].to_numpy()[order]]


def cmd_distances(args: argparse.Namespace) -> None:
    inputs = [args.timeline] + ([args.groups] if args.groups else [])
    run = Run(args, args.output, inputs)
    t, result = _load(args)
    vectors = list(t.bins) if args.space == "raw" else list(result.profiles)
    if args.groups:
        keys = _read_groups(args.groups, t.n_bins)
        grouped: dict[str, list] = {}
        for key, vec in zip(keys, vectors):
            grouped.setdefault(key, []).append(vec)
        matrix = pairwise_group_distance(grouped, t.n_features, normalize=args.normalize)
    else:
        matrix = distance_matrix(vectors, t.n_features, t.labels, normalize=args.normalize)
    run.table("matrix", _matrix_frame(matrix.labels, matrix.values))
    if args.pca_dims:
        pca = pca_project(matrix.values, args.pca_dims)
        frame = pd.DataFrame(pca.coordinates, columns=[f"pc{i + 1}" for i in range(args.pca_dims)])
        frame.insert(0, "label", list(matrix.labels))
        run.table("projection", frame)
        run.json("pca.json", {"explained_variance_ratio": pca.explained_variance_ratio})
    run.finish()


def cmd_trajectory(args: argparse.Namespace) -> None:
    run = Run(args, args.output, [args.timeline])
    t, result = _load(args)
    traj = feature_trajectory(t, result.profiles, args.feature)
    run.table("trajectory", pd.DataFrame({
        "bin_label": list(traj.labels),
        "surprisal": traj.surprisal,
        "frequency": traj.frequency,
    }))
    run.finish()


def cmd_cluster(args: argparse.Namespace) -> None:
    inputs = [args.timeline] + ([args.labels] if args.labels else [])
    run = Run(args, args.output, inputs)
    t, result = _load(args)
    x = scale_for_clustering(result.profiles, t.n_features)
    if args.pca_dims:
        pca = pca_project(x, min(args.pca_dims, *x.shape))
        x = pca.coordinates
        run.json("pca.json", {"explained_variance_ratio": pca.explained_variance_ratio})
    km = kmeans_cluster(x, args.k, seed=args.seed)
    run.table("clusters", pd.DataFrame({"bin_index": np.arange(t.n_bins), "cluster": km.labels}))
    if args.labels:
        report = cluster_vs_labels(km.labels, read_labels(args.labels))
        run.json("cluster_report.json", report.to_dict())
    run.finish()


# --- parser ----------------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _add_threshold(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--theta", type=float, default=None,
                   help="keep entries with |surprisal| > THETA bits (default 0)")
    g.add_argument("--quantile", type=float, default=None,
                   help="keep entries above this per-bin quantile of |surprisal|")


def _add_common(p: argparse.ArgumentParser, table_output: bool = True) -> None:
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads")
    if table_output:
        p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surprisal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a CSV table or text corpus into a timeline directory")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--kind", required=True, choices=("numeric_table", "count_table", "text_corpus"))
    p.add_argument("--normalize", choices=("rowsum", "minmax_then_rowsum"), default=None)
    p.add_argument("--denominator", default=None, help="per-row denominator column (count tables)")
    p.add_argument("--label-column", default=None, help="binary target column, written to labels.csv")
    p.add_argument("--bin-label-column", default=None, help="column holding display labels")
    p.add_argument("--exclude", action="append", default=[], help="columns to ignore (repeatable)")
    p.add_argument("--stopwords", default=None, help="stopword file, one token per line")
    _add_common(p, table_output=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("transform", help="center, surprisal profiles and divergences")
    p.add_argument("timeline")
    p.add_argument("output")
    _add_threshold(p)
    _add_common(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("evaluate", help="score divergences (or external scores) against labels")
    p.add_argument("scores", help="divergence.csv or scores.csv (bin_index, score)")
    p.add_argument("output")
    p.add_argument("--labels", required=True, help="CSV with bin_index,label")
    p.add_argument("--threshold", type=float, default=None,
                   help="decision cutoff (default: precision/recall break-even)")
    p.add_argument("--offsets", type=parse_offsets, default=[-0.10, -0.05, 0.0, 0.05, 0.10],
                   help="comma list of relative threshold offsets, e.g. -0.1,0,0.1 or -10%%,10%%")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="features by accumulated |surprisal|")
    p.add_argument("timeline")
    p.add_argument("output")
    _add_common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("distances", help="pairwise L1 matrix of bins or profiles")
    p.add_argument("timeline")
    p.add_argument("output")
    p.add_argument("--space", choices=("raw", "sp"), default="sp")
    p.add_argument("--normalize", action="store_true", help="divide by the largest entry")
    p.add_argument("--groups", default=None, help="CSV bin_index,group for group-mean distances")
    p.add_argument("--pca-dims", type=_nonneg_int, default=0,
                   help="also project matrix rows onto this many principal components")
    _add_threshold(p)
    _add_common(p)
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("trajectory", help="per-bin surprisal and frequency of one feature")
    p.add_argument("timeline")
    p.add_argument("output")
    p.add_argument("--feature", required=True)
    _add_threshold(p)
    _add_common(p)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("cluster", help="k-means on scaled (optionally PCA-reduced) profiles")
    p.add_argument("timeline")
    p.add_argument("output")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--pca-dims", type=_nonneg_int, default=2, help="0 disables PCA")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels", default=None, help="CSV bin_index,label for cluster agreement")
    _add_threshold(p)
    _add_common(p)
    p.set_defaults(func=cmd_cluster)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (SurprisalError, OSError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("row", "column"):
            if getattr(exc, attr, None) is not None:
                payload[attr] = getattr(exc, attr)
        print(json.dumps(payload), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
