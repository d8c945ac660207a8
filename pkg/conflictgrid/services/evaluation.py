"""
Performance tests for indicators: estimation (Pearson), classification (FLD),
isolation (Baddeley Δ²), and error-class discovery (1-D k-means).
"""
from enum import Enum
from typing import Literal, NamedTuple, Optional, Sequence

import numpy as np
import structlog
from scipy import ndimage, stats
from sklearn.cluster import KMeans

from conflictgrid.core.exceptions import GridDimensionError, UndefinedStatisticError

logger = structlog.get_logger(__name__)

Delta2Domain = Literal["either", "full"]


class GridClass(str, Enum):
    ACCURATE = "accurate"
    INACCURATE = "inaccurate"


class Delta2(NamedTuple):
    value: float
    both_empty: bool


class KMeansResult(NamedTuple):
    """Clusters ordered by ascending centroid."""
    centroids: tuple[float, ...]
    labels: np.ndarray
    inertia: float

    def members(self, values: Sequence[float]) -> list[list[float]]:
        arr = np.asarray(values, dtype=np.float64)
        return [sorted(arr[self.labels == i].tolist()) for i in range(len(self.centroids))]


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Product-moment correlation.

    Raises:
        UndefinedStatisticError: fewer than 3 pairs, unequal lengths, or a constant input
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise UndefinedStatisticError("pearson", f"length mismatch {x.size} vs {y.size}")
    if x.size < 3:
        raise UndefinedStatisticError("pearson", f"{x.size} pairs, need at least 3")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise UndefinedStatisticError("pearson", "constant input")
    r, _ = stats.pearsonr(x, y)
    return float(np.clip(r, -1.0, 1.0))


def fld(class1: Sequence[float], class2: Sequence[float]) -> float:
    """
    Two-class Fisher linear discriminant |μ1-μ2|² / (σ1² + σ2²), population variances.

    Returns inf when both classes are constant at different values.

    Raises:
        UndefinedStatisticError: a class with fewer than 2 samples, or two identical
            constant classes
    """
    a = np.asarray(class1, dtype=np.float64)
    b = np.asarray(class2, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise UndefinedStatisticError("fld", f"class sizes {a.size} and {b.size}, need 2 each")
    spread = a.var() + b.var()
    gap = (a.mean() - b.mean()) ** 2
    if spread == 0.0:
        if gap == 0.0:
            raise UndefinedStatisticError("fld", "both classes constant at the same value")
        return float("inf")
    return float(gap / spread)


def truncated_distance(image: np.ndarray, c: float) -> np.ndarray:
    """Euclidean distance (cells) to the nearest highlighted pixel, capped at c."""
    image = np.asarray(image, dtype=bool)
    if not image.any():
        return np.full(image.shape, float(c))
    return np.minimum(ndimage.distance_transform_edt(~image), c)


def _delta2_from_distances(
    a: np.ndarray,
    b: np.ndarray,
    dist_a: np.ndarray,
    dist_b: np.ndarray,
    domain: Delta2Domain,
) -> Delta2:
    either = a | b
    if not either.any():
        return Delta2(0.0, True)
    diff = (dist_a - dist_b) ** 2
    terms = diff[either] if domain == "either" else diff
    return Delta2(float(np.sqrt(terms.mean())), False)


def baddeley_delta2(
    a: np.ndarray, b: np.ndarray, c: float = 100.0, domain: Delta2Domain = "either"
) -> Delta2:
    """
    Baddeley's Δ² between two binary images.

    Summed over pixels highlighted in either image, or over the whole image with
    domain="full". Two empty images compare as 0 and are flagged.

    Raises:
        GridDimensionError: the images differ in shape
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise GridDimensionError(a.shape, b.shape)
    result = _delta2_from_distances(
        a, b, truncated_distance(a, c), truncated_distance(b, c), domain
    )
    if result.both_empty:
        logger.warning("Delta2 of two empty images", shape=a.shape)
    return result


class IsolationScorer:
    """
    Δ² of many conflict maps against one error image.

    The error image's distance map is computed once; identical conflict maps
    share one result.
    """

    def __init__(self, reference: np.ndarray, c: float = 100.0, domain: Delta2Domain = "either"):
        self.reference = np.asarray(reference, dtype=bool)
        self.c = c
        self.domain = domain
        self._reference_distance = truncated_distance(self.reference, c)
        self._cache: dict[bytes, Delta2] = {}

    def score(self, image: np.ndarray) -> Delta2:
        image = np.asarray(image, dtype=bool)
        if image.shape != self.reference.shape:
            raise GridDimensionError(self.reference.shape, image.shape)
        key = np.packbits(image).tobytes()
        if key not in self._cache:
            self._cache[key] = _delta2_from_distances(
                image,
                self.reference,
                truncated_distance(image, self.c),
                self._reference_distance,
                self.domain,
            )
        return self._cache[key]


def kmeans_1d(values: Sequence[float], k: int, seed: int = 0, n_init: int = 100) -> KMeansResult:
    """
    Lloyd's k-means on scalars with k-means++ seeding, best of `n_init` restarts.

    Raises:
        UndefinedStatisticError: k <= 0 or fewer values than clusters
    """
    if k <= 0:
        raise UndefinedStatisticError("kmeans", f"k={k} must be positive")
    x = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    if x.shape[0] < k:
        raise UndefinedStatisticError("kmeans", f"{x.shape[0]} values for {k} clusters")

    model = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed).fit(x)
    centers = model.cluster_centers_.ravel()
    order = np.argsort(centers, kind="stable")
    relabel = np.empty(k, dtype=np.intp)
    relabel[order] = np.arange(k)
    return KMeansResult(
        centroids=tuple(float(v) for v in centers[order]),
        labels=relabel[model.labels_],
        inertia=float(model.inertia_),
    )


def classify_grids(errors: Sequence[float], threshold: float = 300.0) -> list[GridClass]:
    """Accurate iff error < threshold."""
    return [GridClass.ACCURATE if e < threshold else GridClass.INACCURATE for e in errors]


def discover_error_threshold(
    errors: Sequence[float], k: int = 3, seed: int = 0
) -> Optional[float]:
    """
    Error threshold suggested by clustering the observed error scores.

    The most populated cluster is taken as the accurate class; the threshold is
    midway between its largest member and the next larger score. None when no
    score lies above that cluster.
    """
    values = np.asarray(errors, dtype=np.float64)
    result = kmeans_1d(values, k, seed=seed)
    counts = np.bincount(result.labels, minlength=k)
    accurate = int(np.argmax(counts))
    upper = values[result.labels == accurate].max()
    above = values[values > upper]
    if above.size == 0:
        return None
    threshold = float((upper + above.min()) / 2.0)
    logger.info("Discovered error threshold", threshold=threshold, clusters=k, samples=values.size)
    return threshold
