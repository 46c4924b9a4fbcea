"""Pairwise L1 distances between bins or profiles, and group averages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import SurprisalError, VocabularyMismatchError


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    values: np.ndarray
    normalized: bool = False

    def __len__(self) -> int:
        return len(self.labels)


def _densify(vectors: Sequence, n_features: int) -> np.ndarray:
    """Stack sparse vectors (anything with ``ids`` and ``values``) densely."""
    out = np.zeros((len(vectors), n_features), dtype=np.float64)
    for r, v in enumerate(vectors):
        ids = np.asarray(v.ids)
        if ids.size and (ids.min() < 0 or ids.max() >= n_features):
            raise VocabularyMismatchError(
                f"vector {r} references feature id {int(ids.max())}; vocabulary has {n_features}"
            )
        out[r, ids] = v.values
    return out


def l1_matrix(dense: np.ndarray) -> np.ndarray:
    """Pairwise Manhattan distances between rows."""
    n = dense.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n - 1):
        d = np.abs(dense[i + 1:] - dense[i]).sum(axis=1)
        out[i, i + 1:] = d
        out[i + 1:, i] = d
    return out


def normalize_matrix(values: np.ndarray) -> np.ndarray:
    top = values.max() if values.size else 0.0
    return values / top if top > 0 else values.copy()


def distance_matrix(
    vectors: Sequence,
    n_features: int,
    labels: Sequence[str] | None = None,
    normalize: bool = False,
) -> DistanceMatrix:
    """L1 distances with absent features as zero; optionally scaled by the max entry.

    Works for raw bins and for (thresholded) profiles alike.
    """
    if len(vectors) < 2:
        raise SurprisalError("distance matrix needs at least two vectors")
    if labels is None:
        labels = [str(i) for i in range(len(vectors))]
    if len(labels) != len(vectors):
        raise SurprisalError(f"{len(labels)} labels for {len(vectors)} vectors")
    values = l1_matrix(_densify(vectors, n_features))
    if normalize:
        values = normalize_matrix(values)
    return DistanceMatrix(tuple(str(x) for x in labels), values, normalize)


def pairwise_group_distance(
    groups: Mapping[str, Sequence], n_features: int, normalize: bool = False
) -> DistanceMatrix:
    """Mean L1 distance between members of each pair of groups.

    Off-diagonal entries average all cross pairs; the diagonal averages the
    distinct within-group pairs (zero for a single member).
    """
    keys = list(groups)
    if not keys:
        raise SurprisalError("no groups")
    members: list = []
    slices = []
    for key in keys:
        vecs = list(groups[key])
        if not vecs:
            raise SurprisalError(f"group {key!r} is empty")
        slices.append(slice(len(members), len(members) + len(vecs)))
        members.extend(vecs)
    full = l1_matrix(_densify(members, n_features))

    g = len(keys)
    out = np.zeros((g, g), dtype=np.float64)
    for a in range(g):
        block = full[slices[a], slices[a]]
        m = block.shape[0]
        if m > 1:
            out[a, a] = block[np.triu_indices(m, k=1)].mean()
        for b in range(a + 1, g):
            out[a, b] = out[b, a] = full[slices[a], slices[b]].mean()
    if normalize:
        out = normalize_matrix(out)
    return DistanceMatrix(tuple(str(k) for k in keys), out, normalize)
