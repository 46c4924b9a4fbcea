"""Profile clustering: affine scaling, PCA, k-means and label agreement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import SurprisabilityProfile
from ..errors import SurprisalError
from .distances import _densify
from .scoring import Confusion, as_binary_labels

SCALE = 10.0
OFFSET = 0.4


def scale_for_clustering(profiles: Sequence[SurprisabilityProfile], n_features: int) -> np.ndarray:
    """Dense ``10 * value + 0.4`` per profile coordinate (absent -> 0.4)."""
    return SCALE * _densify(profiles, n_features) + OFFSET


# --- PCA -------------------------------------------------------------------

def _orthogonalize(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for b in basis:
        v = v - (b @ v) * b
    return v


def _unit_orthogonal(n: int, basis: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    for _ in range(100):
        v = _orthogonalize(rng.standard_normal(n), basis)
        v = _orthogonalize(v, basis)
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            return v / norm
    raise SurprisalError("could not build an orthogonal start vector")


def top_eigenpairs(
    a: np.ndarray, k: int, tol: float = 1e-12, max_iter: int = 20000, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Largest ``k`` eigenpairs of a symmetric PSD matrix.

    Power iteration with Hotelling deflation. Each pass first runs on a few
    repeated squarings of the deflated matrix to widen the eigen-gap, then
    refines on the matrix itself until the residual ``|Av - λv|`` drops
    below ``tol * |A|``. Iterates are kept orthogonal to earlier vectors.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    scale = np.linalg.norm(a)
    vals: list[float] = []
    vecs: list[np.ndarray] = []
    b = a.copy()
    for _ in range(k):
        v = _unit_orthogonal(n, vecs, rng)
        if scale == 0:
            vals.append(0.0)
            vecs.append(v)
            continue
        # (B / |B|)^(2^6) to sharpen the dominant direction
        p = b / np.linalg.norm(b)
        for _ in range(6):
            p = p @ p
            pn = np.linalg.norm(p)
            if pn == 0 or not np.isfinite(pn):
                break
            p /= pn
        else:
            w = _orthogonalize(p @ v, vecs)
            if np.linalg.norm(w) > 1e-8:
                v = w / np.linalg.norm(w)
        lam = 0.0
        for _ in range(max_iter):
            w = _orthogonalize(b @ v, vecs)
            lam = float(v @ w)
            if np.linalg.norm(w - lam * v) <= tol * scale:
                break
            wn = np.linalg.norm(w)
            if wn == 0:
                break
            v = w / wn
        lam = max(lam, 0.0)
        vals.append(lam)
        vecs.append(v)
        b = b - lam * np.outer(v, v)
        b = 0.5 * (b + b.T)
    return np.array(vals), np.array(vecs).reshape(k, n)


def _fix_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for i, c in enumerate(out):
        j = int(np.argmax(np.abs(c)))
        if c[j] < 0:
            out[i] = -c
    return out


@dataclass(frozen=True, eq=False)
class PCAResult:
    coordinates: np.ndarray
    explained_variance_ratio: np.ndarray
    components: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray


def pca_project(matrix: np.ndarray, k: int) -> PCAResult:
    """Project mean-centered rows onto the top ``k`` covariance eigenvectors.

    Each component is oriented so its largest-magnitude loading is positive.
    Zero-variance input yields zero ratios. When there are fewer rows than
    columns the eigenproblem is solved on the (rows x rows) Gram matrix.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise SurprisalError("PCA input must be a 2-D matrix")
    n, d = x.shape
    if k < 1 or k > min(n, d):
        raise SurprisalError(f"k={k} must lie in [1, {min(n, d)}] for a {n}x{d} matrix")
    mean = x.mean(axis=0)
    xc = x - mean
    denom = max(n - 1, 1)

    if d <= n:
        cov = xc.T @ xc / denom
        trace = float(np.trace(cov))
        lam, comps = top_eigenpairs(cov, k)
    else:
        gram = xc @ xc.T / denom
        trace = float(np.trace(gram))
        lam, u = top_eigenpairs(gram, k)
        comps = []
        rng = np.random.default_rng(1)
        for i in range(k):
            v = xc.T @ u[i]
            norm = np.linalg.norm(v)
            if lam[i] > 0 and norm > 0:
                v = v / norm
            else:
                v = _unit_orthogonal(d, comps, rng)
            comps.append(v)
        comps = np.array(comps)
    comps = _fix_signs(comps)
    ratios = lam / trace if trace > 0 else np.zeros(k)
    return PCAResult(xc @ comps.T, ratios, comps, mean, lam)


# --- k-means ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances, computed by direct differences."""
    n, d = x.shape
    k = c.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    step = max(1, (1 << 22) // max(1, k * d))
    for lo in range(0, n, step):
        diff = x[lo:lo + step, None, :] - c[None, :, :]
        out[lo:lo + step] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    closest = _sq_dists(x, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        idx = int(rng.choice(n, p=closest / total))
        centers.append(x[idx])
        closest = np.minimum(closest, _sq_dists(x, x[idx][None, :])[:, 0])
    return np.array(centers)


def kmeans_cluster(matrix: np.ndarray, k: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops when assignments repeat or after ``max_iter`` assignment steps.
    An emptied cluster is re-seeded at the point farthest from its own
    centroid. ``objective`` records the within-cluster sum of squares after
    every assignment step and never increases.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise SurprisalError("k-means input must be a 2-D matrix")
    n = x.shape[0]
    if k < 2:
        raise SurprisalError(f"k must be >= 2, got {k}")
    if n < k:
        raise SurprisalError(f"{n} rows cannot form {k} clusters")
    if np.unique(x, axis=0).shape[0] < k:
        raise SurprisalError(f"fewer than {k} distinct rows")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(x, k, rng)
    labels = None
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(x, centroids)
        new = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            converged = True
            break
        labels = new
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        filled = counts > 0
        centroids = centroids.copy()
        centroids[filled] = sums[filled] / counts[filled, None]
        if not filled.all():
            own = np.einsum("nd,nd->n", x - centroids[labels], x - centroids[labels])
            taken: set[int] = set()
            for c in np.flatnonzero(~filled):
                for idx in np.argsort(-own, kind="stable"):
                    if int(idx) not in taken:
                        taken.add(int(idx))
                        centroids[c] = x[idx]
                        break
    return KMeansResult(labels, centroids, history, it, converged)


# --- cluster / label agreement ---------------------------------------------

@dataclass(frozen=True, eq=False)
class ClusterReport:
    """Agreement between cluster ids and true labels.

    ``table[i, j]`` counts bins with true label ``classes[i]`` in cluster
    ``clusters[j]``. Each cluster is scored against its majority label.
    ``overall_f1`` is the unweighted mean of per-cluster F1;
    ``weighted_f1`` weights by cluster size.
    """

    clusters: np.ndarray
    classes: np.ndarray
    table: np.ndarray
    majority: dict
    precision: dict
    recall: dict
    f1: dict
    overall_f1: float
    weighted_f1: float
    binary: Confusion | None

    def to_dict(self) -> dict:
        out = {
            "clusters": self.clusters.tolist(),
            "classes": self.classes.tolist(),
            "table": self.table.tolist(),
            "majority_label": {str(c): int(v) for c, v in self.majority.items()},
            "precision": {str(c): v for c, v in self.precision.items()},
            "recall": {str(c): v for c, v in self.recall.items()},
            "f1": {str(c): v for c, v in self.f1.items()},
            "overall_f1": self.overall_f1,
            "weighted_f1": self.weighted_f1,
        }
        if self.binary is not None:
            out["binary_confusion"] = self.binary._asdict()
        return out


def cluster_vs_labels(assignments, labels) -> ClusterReport:
    a = np.asarray(assignments).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if a.size != y.size:
        raise SurprisalError(f"{a.size} assignments but {y.size} labels")
    if a.size == 0:
        raise SurprisalError("no assignments")
    clusters, ai = np.unique(a, return_inverse=True)
    classes, yi = np.unique(y, return_inverse=True)
    table = np.zeros((classes.size, clusters.size), dtype=np.int64)
    np.add.at(table, (yi, ai), 1)
    class_totals = table.sum(axis=1)

    majority, prec, rec, f1 = {}, {}, {}, {}
    sizes = table.sum(axis=0)
    for j, c in enumerate(clusters.tolist()):
        m = int(np.argmax(table[:, j]))  # ties -> smaller label
        hit = table[m, j]
        p = hit / sizes[j]
        r = hit / class_totals[m]
        majority[c] = classes[m].item()
        prec[c] = float(p)
        rec[c] = float(r)
        f1[c] = float(2 * p * r / (p + r)) if p + r > 0 else 0.0
    f1s = np.array(list(f1.values()))
    overall = float(f1s.mean())
    weighted = float((f1s * sizes).sum() / sizes.sum())

    binary = None
    if set(classes.tolist()) <= {0, 1}:
        yb = as_binary_labels(y)
        pred = np.array([majority[c] for c in clusters.tolist()])[ai] == 1
        pos = yb == 1
        tp = int(np.count_nonzero(pred & pos))
        fp = int(np.count_nonzero(pred & ~pos))
        fn = int(np.count_nonzero(~pred & pos))
        binary = Confusion(tp, fp, int(y.size - tp - fp - fn), fn)
    return ClusterReport(clusters, classes, table, majority, prec, rec, f1, overall, weighted, binary)
