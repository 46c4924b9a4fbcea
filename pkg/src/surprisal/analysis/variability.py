"""Which features move the most along the timeline, and how."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import FeatureVocabulary, SurprisabilityProfile, Timeline
from ..errors import PolicyError, SurprisalError


@dataclass(frozen=True, eq=False)
class VariabilityRanking:
    """Features by accumulated |surprisal| over all bins, largest first."""

    feature_ids: np.ndarray
    values: np.ndarray
    vocabulary: FeatureVocabulary | None = None

    def __len__(self) -> int:
        return int(self.feature_ids.size)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.feature_ids.tolist(), self.values.tolist()))

    def names(self) -> list[str]:
        if self.vocabulary is None:
            return [str(i) for i in self.feature_ids.tolist()]
        return [self.vocabulary.names[i] for i in self.feature_ids.tolist()]

    def top(self, k: int) -> list[str]:
        return self.names()[:k]


def accumulated_divergence(profiles: Sequence[SurprisabilityProfile], n_features: int) -> np.ndarray:
    """Dense per-feature sum of |surprisal| over bins (zero-valued entries included)."""
    if any(not sp.complete for sp in profiles):
        raise PolicyError(
            "variability needs unfiltered profiles; thresholded ones would undercount"
        )
    if not profiles:
        return np.zeros(n_features)
    ids = np.concatenate([sp.ids for sp in profiles])
    mags = np.abs(np.concatenate([sp.values for sp in profiles]))
    if ids.size and ids.max() >= n_features:
        raise SurprisalError("profile references a feature id outside the vocabulary")
    return np.bincount(ids, weights=mags, minlength=n_features)


def variability_ranking(
    profiles: Sequence[SurprisabilityProfile],
    vocabulary: FeatureVocabulary | int,
) -> VariabilityRanking:
    """Rank features by total |surprisal|; features that never deviate are left out."""
    if isinstance(vocabulary, FeatureVocabulary):
        vocab, n = vocabulary, len(vocabulary)
    else:
        vocab, n = None, int(vocabulary)
    totals = accumulated_divergence(profiles, n)
    ids = np.flatnonzero(totals > 0)
    order = np.lexsort((ids, -totals[ids]))
    return VariabilityRanking(ids[order], totals[ids][order], vocab)


@dataclass(frozen=True, eq=False)
class Trajectory:
    feature: str
    labels: tuple[str, ...]
    surprisal: np.ndarray
    frequency: np.ndarray


def feature_trajectory(
    timeline: Timeline, profiles: Sequence[SurprisabilityProfile], feature: str
) -> Trajectory:
    """Per-bin signed surprisal and raw weight of one feature.

    Entries removed by thresholding read as zero surprisal.
    """
    fid = timeline.vocabulary.id_of(feature)
    if len(profiles) != timeline.n_bins:
        raise SurprisalError(f"{len(profiles)} profiles for {timeline.n_bins} bins")
    surprisal = np.array([sp.get(fid) for sp in profiles], dtype=np.float64)
    frequency = np.array([b.get(fid) for b in timeline.bins], dtype=np.float64)
    return Trajectory(feature, timeline.labels, surprisal, frequency)
