"""Synthetic streams for the shift taxonomy, plus uniformity report helpers.

Objects are Gaussian with unit covariance around per-class means placed on a
simplex with inter-class distance 4 (scaled standard basis vectors, so the
object dimension must be at least the number of classes). That keeps
nearest-neighbour conformity informative at desk scale while every stream is
reproducible from its config and seed alone.

Scenarios:

iid
    Labels categorical-uniform, objects drawn from the class conditional.
concept-shift
    Identical, except every class mean translates by ``shift_magnitude``
    along a fixed unit direction from step ``changepoint``+1 on; the label
    marginals are untouched.
label-shift
    Class conditionals fixed; the label marginals switch from uniform to a
    skewed vector (class k weighted by exp(-shift_magnitude * k)) from step
    ``changepoint``+1 on.
markov-labels
    Labels follow a row-stochastic transition matrix, so the stream is not
    exchangeable, while objects are drawn independently from the class
    conditional given the label, so it stays exchangeable within each label
    class. This is the regime where only the label-conditional leg keeps its
    validity guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Observation, RandomSource

SCENARIOS = ("iid", "concept-shift", "label-shift", "markov-labels")
_SHIFT_SCENARIOS = ("concept-shift", "label-shift")

_INTER_CLASS_DISTANCE = 4.0
_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ScenarioConfig:
    """Generator parameters for one synthetic stream."""

    scenario: str
    n_steps: int
    n_classes: int = 2
    dim: int = 2
    changepoint: int | None = None
    shift_magnitude: float = 2.0
    label_transition: tuple[tuple[float, ...], ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        if self.dim < self.n_classes:
            raise ValueError(
                "object dimension must be at least n_classes "
                f"(got dim={self.dim}, n_classes={self.n_classes})"
            )
        if self.shift_magnitude < 0:
            raise ValueError("shift_magnitude must be nonnegative")
        if self.scenario in _SHIFT_SCENARIOS:
            if self.changepoint is None:
                raise ValueError(f"{self.scenario} requires a changepoint")
            if not 0 < self.changepoint <= self.n_steps:
                raise ValueError("changepoint must satisfy 0 < changepoint <= n_steps")
        if self.scenario == "markov-labels":
            if self.label_transition is None:
                raise ValueError("markov-labels requires a label_transition matrix")
            matrix = np.asarray(self.label_transition, dtype=np.float64)
            if matrix.shape != (self.n_classes, self.n_classes):
                raise ValueError(
                    f"label_transition must be {self.n_classes}x{self.n_classes}"
                )
            if (matrix < 0).any():
                raise ValueError("label_transition entries must be nonnegative")
            if np.abs(matrix.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
                raise ValueError("label_transition rows must sum to 1")


def class_means(n_classes: int, dim: int) -> np.ndarray:
    """Per-class means: scaled basis vectors with pairwise distance 4."""
    if dim < n_classes:
        raise ValueError("dim must be at least n_classes")
    means = np.zeros((n_classes, dim))
    scale = _INTER_CLASS_DISTANCE / np.sqrt(2.0)
    means[np.arange(n_classes), np.arange(n_classes)] = scale
    return means


def _categorical(cum_probs: np.ndarray, u: float, n_classes: int) -> int:
    return min(int(np.searchsorted(cum_probs, u, side="right")), n_classes - 1)


def _skewed_marginals(n_classes: int, magnitude: float) -> np.ndarray:
    weights = np.exp(-magnitude * np.arange(n_classes))
    return weights / weights.sum()


def generate(config: ScenarioConfig, source: RandomSource) -> list[Observation]:
    """Materialize one stream. Pure given (config, source)."""
    k = config.n_classes
    means = class_means(k, config.dim)
    uniform_cum = np.cumsum(np.full(k, 1.0 / k))
    shift_direction = np.full(config.dim, 1.0 / np.sqrt(config.dim))

    if config.scenario == "label-shift":
        skew_cum = np.cumsum(_skewed_marginals(k, config.shift_magnitude))
    if config.scenario == "markov-labels":
        transition_cum = np.cumsum(
            np.asarray(config.label_transition, dtype=np.float64), axis=1
        )

    stream = []
    label = None
    for step in range(1, config.n_steps + 1):
        u = source.uniform_draw()
        if config.scenario == "markov-labels" and label is not None:
            label = _categorical(transition_cum[label], u, k)
        elif config.scenario == "label-shift" and step > config.changepoint:
            label = _categorical(skew_cum, u, k)
        else:
            label = _categorical(uniform_cum, u, k)
        x = means[label] + source.normal_draws(config.dim)
        if config.scenario == "concept-shift" and step > config.changepoint:
            x = x + config.shift_magnitude * shift_direction
        stream.append(Observation(x, label))
    return stream


@dataclass(frozen=True)
class UniformityReport:
    """Kolmogorov-Smirnov distance against uniform, with an optional paired
    chi-square statistic for two-dimensional independence checks."""

    ks_distance: float
    sample_count: int
    chisq_stat: float | None = None
    chisq_bins: int | None = None
    chisq_df: int | None = None
    pair_count: int | None = None


def ks_distance(samples) -> float:
    """Exact KS distance of the empirical CDF from uniform on [0, 1]."""
    u = np.sort(np.asarray(samples, dtype=np.float64))
    n = u.size
    if n == 0:
        raise ValueError("samples must be non-empty")
    upper = (np.arange(1, n + 1) / n - u).max()
    lower = (u - np.arange(n) / n).max()
    return float(max(upper, lower))


def ks_uniform_bound(n: int) -> float:
    """Frozen pass threshold for pooled-uniformity checks: 1.95/sqrt(n) + 0.005."""
    return 1.95 / np.sqrt(n) + 0.005


def pair_chisq(pairs, bins: int = 10) -> tuple[float, int]:
    """Chi-square statistic of paired samples against uniformity on [0,1]^2.

    Returns (statistic, degrees of freedom) for a bins x bins grid with
    equal expected counts.
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must have shape (n, 2)")
    counts, _, _ = np.histogram2d(
        pairs[:, 0], pairs[:, 1], bins=bins, range=[[0.0, 1.0], [0.0, 1.0]]
    )
    expected = pairs.shape[0] / (bins * bins)
    stat = float(((counts - expected) ** 2 / expected).sum())
    return stat, bins * bins - 1


def uniformity_report(samples, pairs=None, bins: int = 10) -> UniformityReport:
    """KS uniformity of pooled samples, optionally with a paired chi-square."""
    samples = np.asarray(samples, dtype=np.float64)
    report = UniformityReport(ks_distance(samples), samples.size)
    if pairs is not None:
        pairs = np.asarray(pairs, dtype=np.float64)
        stat, df = pair_chisq(pairs, bins)
        report = UniformityReport(
            report.ks_distance,
            report.sample_count,
            chisq_stat=stat,
            chisq_bins=bins,
            chisq_df=df,
            pair_count=pairs.shape[0],
        )
    return report
