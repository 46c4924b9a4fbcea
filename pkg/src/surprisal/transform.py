"""Center construction, per-feature signed divergence, and thresholding.

Every bin is compared with the timeline center (the mean of all bins, absent
features counted as zero) by Jensen-Shannon divergence in bits. JSD splits
into one nonnegative term per feature; each term is signed by whether the
bin over- or under-represents that feature relative to the center.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import (
    SparseDistribution,
    SurprisabilityProfile,
    Timeline,
    TimelineCenter,
    require_valid,
)
from .errors import PolicyError, TimelineError, VocabularyMismatchError

_INV_4LN2 = 1.0 / (4.0 * math.log(2.0))
# cells per dense block in batch transforms
_BLOCK_CELLS = 1 << 21


@dataclass(frozen=True)
class ThresholdPolicy:
    """Which profile entries survive filtering.

    ``fixed`` keeps entries with ``|value| > theta``; ``quantile`` keeps
    entries above the bin's ``q``-quantile of ``|value|``; ``none`` keeps all.
    """

    mode: Literal["fixed", "quantile", "none"] = "fixed"
    theta: float = 0.0
    q: float | None = None

    def __post_init__(self):
        if self.mode == "fixed":
            if not (self.theta >= 0 and math.isfinite(self.theta)):
                raise PolicyError(f"theta must be a finite value >= 0, got {self.theta}")
        elif self.mode == "quantile":
            if self.q is None or not (0 < self.q < 1):
                raise PolicyError(f"quantile must lie strictly between 0 and 1, got {self.q}")
        elif self.mode != "none":
            raise PolicyError(f"unknown threshold mode {self.mode!r}")

    @classmethod
    def fixed(cls, theta: float = 0.0) -> ThresholdPolicy:
        return cls("fixed", theta=float(theta))

    @classmethod
    def quantile(cls, q: float) -> ThresholdPolicy:
        return cls("quantile", q=float(q))

    @classmethod
    def keep_all(cls) -> ThresholdPolicy:
        return cls("none")


DEFAULT_POLICY = ThresholdPolicy.fixed(0.0)


def build_tcr(t: Timeline) -> TimelineCenter:
    """Mean of all bins with absences counted as zero.

    Every bin carries weight 1/N whatever its support size, so the result is
    itself a distribution.
    """
    if t.n_bins == 0:
        raise TimelineError("no bins")
    _, ids, weights = t.csr
    if ids.size and (ids.min() < 0 or ids.max() >= t.n_features):
        raise VocabularyMismatchError("bin references a feature id outside the vocabulary")
    n, n_feat = t.n_bins, t.n_features
    # accumulate deviations from each feature's first observed weight so that
    # identical bins reproduce their weights exactly
    uniq, first = np.unique(ids, return_index=True)
    ref = np.zeros(n_feat)
    ref[uniq] = weights[first]
    dev = np.bincount(ids, weights=weights - ref[ids], minlength=n_feat)
    absent = n - np.bincount(ids, minlength=n_feat)
    dev -= absent * ref
    return TimelineCenter(ref + dev / n, n)


def _check_ids(tcr: TimelineCenter, bin: SparseDistribution) -> None:
    if bin.ids.size and (bin.ids.min() < 0 or bin.ids.max() >= len(tcr)):
        raise VocabularyMismatchError(
            f"bin references feature id {int(bin.ids.max())} but the center has {len(tcr)} features"
        )


def mixture(tcr: TimelineCenter, bin: SparseDistribution) -> np.ndarray:
    """Dense midpoint ``(center + bin) / 2``."""
    _check_ids(tcr, bin)
    p = bin.to_dense(len(tcr))
    return 0.5 * (tcr.values + p)


def feature_contributions(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Per-feature JSD terms ``½q·log2(q/m) + ½p·log2(p/m)``, ``m = (p+q)/2``.

    Broadcasts over ``q`` (center) and ``p`` (bin). With ``s = p+q`` and
    ``d = (p-q)/s`` a term equals ``s/(4 ln 2)·[log1p(-d²) + 2d·atanh(d)]``,
    which stays accurate and nonnegative when ``p`` and ``q`` nearly agree;
    the direct form is used when they are far apart. A zero on either side
    gives exactly half the other value.
    """
    q, p = np.broadcast_arrays(np.asarray(q, dtype=np.float64), np.asarray(p, dtype=np.float64))
    s = p + q
    out = np.zeros(s.shape, dtype=np.float64)
    pos = s > 0
    d = np.zeros(s.shape, dtype=np.float64)
    np.divide(p - q, s, out=d, where=pos)

    near = pos & (np.abs(d) <= 0.5)
    dn = d[near]
    out[near] = s[near] * _INV_4LN2 * (np.log1p(-dn * dn) + 2.0 * dn * np.arctanh(dn))

    far = pos & ~near
    qf, pf, sf = q[far], p[far], s[far]
    with np.errstate(divide="ignore", invalid="ignore"):
        tq = np.where(qf > 0, qf * np.log2(2.0 * qf / sf), 0.0)
        tp = np.where(pf > 0, pf * np.log2(2.0 * pf / sf), 0.0)
    out[far] = 0.5 * (tq + tp)
    return out


def _profiles_for_block(
    q: np.ndarray, block: np.ndarray, first_index: int
) -> list[SurprisabilityProfile]:
    mags = feature_contributions(q[None, :], block)
    signs = np.sign(block - q[None, :])
    divergences = mags.sum(axis=1)
    profiles = []
    for r in range(block.shape[0]):
        ids = np.flatnonzero(signs[r])
        profiles.append(SurprisabilityProfile(
            first_index + r, ids, signs[r, ids] * mags[r, ids], float(divergences[r])
        ))
    return profiles


def surprisability_profile(
    tcr: TimelineCenter, bin: SparseDistribution, bin_index: int
) -> SurprisabilityProfile:
    """Signed contributions of every feature to ``JSD(center, bin)``.

    Features missing from the bin but present in the center contribute half
    their center weight, with negative sign.
    """
    _check_ids(tcr, bin)
    block = bin.to_dense(len(tcr))[None, :]
    return _profiles_for_block(tcr.values, block, bin_index)[0]


def apply_threshold(sp: SurprisabilityProfile, policy: ThresholdPolicy) -> SurprisabilityProfile:
    """Filtered copy; the scalar divergence is carried over unchanged."""
    if policy.mode == "none" or len(sp) == 0:
        return sp
    mag = np.abs(sp.values)
    if policy.mode == "fixed":
        keep = mag > policy.theta
    else:
        keep = mag > np.quantile(mag, policy.q)
    if keep.all():
        return sp
    return SurprisabilityProfile(
        sp.bin_index, sp.ids[keep], sp.values[keep], sp.divergence, complete=False
    )


@dataclass(frozen=True, eq=False)
class TransformResult:
    tcr: TimelineCenter
    profiles: tuple[SurprisabilityProfile, ...]
    divergences: np.ndarray
    policy: ThresholdPolicy


def transform_timeline(
    t: Timeline,
    policy: ThresholdPolicy = DEFAULT_POLICY,
    workers: int = 1,
    validate: bool = True,
) -> TransformResult:
    """Center, per-bin profiles (thresholded by ``policy``) and divergences.

    Bins are processed in dense blocks, optionally on ``workers`` threads;
    output order always follows bin order.
    """
    if validate:
        require_valid(t)
    tcr = build_tcr(t)
    q = tcr.values
    rows = max(1, _BLOCK_CELLS // max(1, t.n_features))
    starts = range(0, t.n_bins, rows)

    def run(start: int) -> list[SurprisabilityProfile]:
        stop = min(start + rows, t.n_bins)
        raw = _profiles_for_block(q, t.dense(start, stop), start)
        return [apply_threshold(sp, policy) for sp in raw]

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, starts))
    else:
        blocks = [run(s) for s in starts]
    profiles = tuple(sp for block in blocks for sp in block)
    divergences = np.fromiter((sp.divergence for sp in profiles), dtype=np.float64,
                              count=len(profiles))
    return TransformResult(tcr, profiles, divergences, policy)

