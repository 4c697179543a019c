"""Nearest-neighbour conformity scores over growing observation prefixes.

Four scoring variants are supported, all functions of two per-point
quantities that :class:`NnCache` maintains incrementally while the stream
grows: the Euclidean distance ``d_same`` to the nearest point with the same
label (the point itself excluded) and the distance ``d_other`` to the nearest
point with any other label.

    ratio                       d_other / d_same
    ratio-squared-denominator   d_other / d_same**2
    same-class                  1 / d_same
    nearest-object              1 / min(d_same, d_other)

Degenerate prefixes (empty classes, duplicate points) are made total by fixed
extended-real conventions:

    min over an empty set  :=  +inf
    finite / +inf          :=  0
    positive / 0           :=  +inf
    0 / 0                  :=  1
    +inf / +inf            :=  1

Downstream p-values depend on scores only through ranks, so any fixed
measurable convention preserves their validity; these keep the scores totally
ordered and free of NaNs.

``label_average`` replaces every score by the mean score of its label class,
which makes the output depend on the labels alone (equal labels always
receive bit-identical scores).
"""

from __future__ import annotations

import numpy as np

from .core import Observation

NN_VARIANTS = (
    "ratio",
    "ratio-squared-denominator",
    "same-class",
    "nearest-object",
)


class NnCache:
    """Incrementally maintained nearest-neighbour distances for a prefix.

    Each insertion costs O(n * dim): the new point's distances to every
    stored point are computed once and folded into the running minima of both
    the old points and the new one. The cache is single-owner and mutable;
    scoring reads are safe between insertions.
    """

    def __init__(self, dim: int | None = None):
        self._dim = None if dim is None else int(dim)
        self._n = 0
        self._x: np.ndarray | None = None
        self._labels: np.ndarray | None = None
        self._d_same: np.ndarray | None = None
        self._d_other: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self._n

    @property
    def dim(self) -> int | None:
        return self._dim

    @property
    def labels(self) -> np.ndarray:
        """Labels of the stored prefix (read-only view)."""
        return self._view(self._labels)

    @property
    def d_same(self) -> np.ndarray:
        """Per-point distance to the nearest same-label point (read-only view)."""
        return self._view(self._d_same)

    @property
    def d_other(self) -> np.ndarray:
        """Per-point distance to the nearest other-label point (read-only view)."""
        return self._view(self._d_other)

    def _view(self, arr: np.ndarray | None) -> np.ndarray:
        if arr is None:
            return np.empty(0)
        out = arr[: self._n]
        out.flags.writeable = False
        return out

    def _grow(self):
        cap = 16 if self._x is None else 2 * self._x.shape[0]
        x = np.empty((cap, self._dim), dtype=np.float64)
        labels = np.empty(cap, dtype=np.int64)
        d_same = np.empty(cap, dtype=np.float64)
        d_other = np.empty(cap, dtype=np.float64)
        if self._n:
            x[: self._n] = self._x[: self._n]
            labels[: self._n] = self._labels[: self._n]
            d_same[: self._n] = self._d_same[: self._n]
            d_other[: self._n] = self._d_other[: self._n]
        self._x, self._labels = x, labels
        self._d_same, self._d_other = d_same, d_other

    def insert(self, obs: Observation) -> None:
        """Add one observation, updating all stored minima.

        Raises ValueError when the object dimension does not match the cache
        (the first insertion fixes the dimension if it was not given).
        """
        x = np.asarray(obs.x, dtype=np.float64)
        y = int(obs.y)
        if self._dim is None:
            self._dim = x.size
        if x.size != self._dim:
            raise ValueError(
                f"object dimension {x.size} does not match cache dimension {self._dim}"
            )
        if self._x is None or self._n == self._x.shape[0]:
            self._grow()
        n = self._n
        if n:
            diff = self._x[:n] - x
            dist = np.sqrt((diff * diff).sum(axis=1))
            same = self._labels[:n] == y
            np.minimum(self._d_same[:n], np.where(same, dist, np.inf), out=self._d_same[:n])
            np.minimum(self._d_other[:n], np.where(same, np.inf, dist), out=self._d_other[:n])
            self._d_same[n] = dist[same].min() if same.any() else np.inf
            self._d_other[n] = dist[~same].min() if not same.all() else np.inf
        else:
            self._d_same[0] = np.inf
            self._d_other[0] = np.inf
        self._x[n] = x
        self._labels[n] = y
        self._n = n + 1


def _extended_ratio(num, den) -> np.ndarray:
    """Elementwise num/den under the module's extended-real conventions."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    # 0/0 and inf/inf come out as NaN; both map to 1 by convention.
    out = np.where(np.isnan(out), 1.0, out)
    return out


def score_nn(variant: str, cache: NnCache) -> np.ndarray:
    """Conformity scores of the cached prefix under one of the NN variants.

    Higher scores mean more conforming. The result has one entry per stored
    observation and may contain +inf but never NaN.
    """
    if variant not in NN_VARIANTS:
        raise ValueError(f"unknown conformity variant {variant!r}")
    if cache.n == 0:
        raise ValueError("cannot score an empty cache")
    ds = cache.d_same
    do = cache.d_other
    if variant == "ratio":
        return _extended_ratio(do, ds)
    if variant == "ratio-squared-denominator":
        return _extended_ratio(do, ds * ds)
    if variant == "same-class":
        return _extended_ratio(np.ones_like(ds), ds)
    return _extended_ratio(np.ones_like(ds), np.minimum(ds, do))


def label_average(scores, labels) -> np.ndarray:
    """Replace each score by the mean score of its label class.

    Infinite inputs are first clamped to twice the largest finite score (to
    1.0 when no finite score exists) so the class means stay finite; this is
    rank-affecting only in degenerate prefixes. The output assigns
    bit-identical values to equal labels.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    finite = np.isfinite(scores)
    if not finite.all():
        cap = 2.0 * scores[finite].max() if finite.any() else 1.0
        scores = np.where(finite, scores, cap)
    sums = np.bincount(labels, weights=scores)
    counts = np.bincount(labels)
    return sums[labels] / counts[labels]
