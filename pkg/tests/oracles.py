"""Independent reference computations used by the tests.

None of these call into the package's divergence code.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from surprisal.core import FeatureVocabulary, SparseDistribution, Timeline


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def jsd_entropy_identity(q, p) -> float:
    """JSD(q, p) = H((q+p)/2) - H(q)/2 - H(p)/2, in bits."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    return entropy_bits(0.5 * (q + p)) - 0.5 * entropy_bits(q) - 0.5 * entropy_bits(p)


def naive_terms(q, p) -> np.ndarray:
    """Textbook per-feature terms, 0*log(0/x) = 0."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    m = 0.5 * (q + p)
    out = np.zeros_like(q)
    for j in range(q.size):
        t = 0.0
        if q[j] > 0:
            t += 0.5 * q[j] * np.log2(q[j] / m[j])
        if p[j] > 0:
            t += 0.5 * p[j] * np.log2(p[j] / m[j])
        out[j] = t
    return out


def random_timeline(rng: np.random.Generator, max_bins: int = 20, max_features: int = 50,
                    min_bins: int = 1) -> Timeline:
    n_feat = int(rng.integers(1, max_features + 1))
    n_bins = int(rng.integers(min_bins, max_bins + 1))
    bins = []
    for _ in range(n_bins):
        size = int(rng.integers(1, n_feat + 1))
        ids = rng.choice(n_feat, size=size, replace=False)
        # long-tailed weights
        w = rng.pareto(1.5, size=size) + 1e-3
        bins.append(SparseDistribution.from_weights(ids, w))
    names = tuple(f"f{i}" for i in range(n_feat))
    return Timeline(FeatureVocabulary(names), tuple(bins))


def brute_break_even(scores, labels):
    """Enumerate every distinct cutoff with exact rational arithmetic.

    Returns (cutoff, |P-R|, F1) of the best candidate under: min |P-R|,
    then max F1, then min cutoff.
    """
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    n_pos = sum(labels)
    best = None
    for c in sorted(set(scores)):
        tp = sum(1 for s, y in zip(scores, labels) if s >= c and y == 1)
        pp = sum(1 for s in scores if s >= c)
        p = Fraction(tp, pp)
        r = Fraction(tp, n_pos)
        f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
        key = (abs(p - r), -f1, c)
        if best is None or key < best[0]:
            best = (key, c, abs(p - r), f1)
    return best[1], float(best[2]), float(best[3])


def brute_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for a, b in itertools.product(pos, neg):
        total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def brute_l1(u, v) -> float:
    return float(sum(abs(a - b) for a, b in zip(u, v)))


def sym3_eigen(c):
    """Eigenpairs of a symmetric 3x3 matrix from its characteristic polynomial.

    Roots of det(C - xI) = -x^3 + tr x^2 - m2 x + det, vectors from cross
    products of rows of C - xI. Returned in descending eigenvalue order.
    """
    c = np.asarray(c, dtype=np.float64)
    tr = np.trace(c)
    m2 = (c[0, 0] * c[1, 1] - c[0, 1] ** 2 + c[0, 0] * c[2, 2] - c[0, 2] ** 2
          + c[1, 1] * c[2, 2] - c[1, 2] ** 2)
    det = (c[0, 0] * (c[1, 1] * c[2, 2] - c[1, 2] ** 2)
           - c[0, 1] * (c[0, 1] * c[2, 2] - c[1, 2] * c[0, 2])
           + c[0, 2] * (c[0, 1] * c[1, 2] - c[1, 1] * c[0, 2]))
    roots = np.sort(np.real(np.roots([1.0, -tr, m2, -det])))[::-1]
    vecs = []
    for lam in roots:
        a = c - lam * np.eye(3)
        crosses = [np.cross(a[i], a[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
        v = max(crosses, key=np.linalg.norm)
        vecs.append(v / np.linalg.norm(v))
    return roots, np.array(vecs)
