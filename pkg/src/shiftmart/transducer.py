"""Randomized p-values from conformity scores.

Two rank-based transducers convert the score vector of the current prefix
into a p-value for the newest observation:

* ``p_label_conditional`` ranks the newest score within its own label class
  only. Fed with nearest-neighbour scores this is the concept-shift leg: its
  p-values stay uniform whenever objects are exchangeable within each label
  class, even when the label sequence itself is far from IID.
* ``p_conformal`` ranks globally. Fed with class-averaged scores (which
  depend on the labels alone) this is the label-shift leg.

``interleave`` runs both legs over a stream in a single pass, drawing the
tie-breaking values tau from two named substreams. Under exchangeable
streams with independent tau substreams the interleaved p-values behave as
independent uniforms, which is what makes the product of the two resulting
test martingales a valid exchangeability martingale. Scores are recomputed
from the full prefix at every step (adding an observation changes earlier
nearest-neighbour scores), so no stale-score shortcut is taken.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .core import Observation, RandomSource
from .conformity import NN_VARIANTS, NnCache, label_average, score_nn


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return tau


def p_conformal(scores, tau: float) -> float:
    """Rank-based p-value of the newest (last) score among all scores.

    p = (#{i: a_i < a_n} + tau * #{i: a_i = a_n}) / n, the newest score
    itself included in the tie count, so p >= tau/n > 0 whenever tau > 0.
    Ties use exact floating-point equality.
    """
    tau = _check_tau(tau)
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("scores must be non-empty")
    newest = s[-1]
    less = int(np.count_nonzero(s < newest))
    equal = int(np.count_nonzero(s == newest))
    return (less + tau * equal) / s.size


def p_label_conditional(scores, labels, tau: float) -> float:
    """Rank-based p-value of the newest score within its own label class.

    Counts are restricted to indices with the newest observation's label; the
    denominator is the class count, at least 1 because the newest observation
    qualifies.
    """
    tau = _check_tau(tau)
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.size == 0:
        raise ValueError("scores must be non-empty")
    if s.shape != y.shape:
        raise ValueError("scores and labels must have equal length")
    mask = y == y[-1]
    sub = s[mask]
    newest = sub[-1]
    less = int(np.count_nonzero(sub < newest))
    equal = int(np.count_nonzero(sub == newest))
    return (less + tau * equal) / sub.size


@dataclass(frozen=True, eq=False)
class InterleavedPValues:
    """Per-step p-values of the two legs plus randomization provenance.

    ``p_concept[k]`` and ``p_label[k]`` belong to step k+1 of the stream; the
    provenance strings identify which tau substream fed each leg (used to
    refuse invalid martingale products downstream).
    """

    p_concept: np.ndarray
    p_label: np.ndarray
    concept_provenance: str
    label_provenance: str

    def __len__(self) -> int:
        return self.p_concept.size


def _step_scores(cache, obs, concept_measure, label_measure):
    """Insert one observation and score the enlarged prefix for both legs."""
    cache.insert(obs)
    labels = cache.labels
    concept_scores = score_nn(concept_measure, cache)
    if label_measure == concept_measure:
        raw = concept_scores
    else:
        raw = score_nn(label_measure, cache)
    return concept_scores, label_average(raw, labels), labels


def interleave(
    stream: Sequence[Observation],
    concept_measure: str,
    label_measure: str,
    tau_src: RandomSource,
    tau_prime_src: RandomSource,
) -> InterleavedPValues:
    """Run both transducer legs over a stream of observations.

    ``concept_measure`` and ``label_measure`` are NN variant tags; they may
    differ. The concept leg feeds raw scores to ``p_label_conditional``; the
    label leg class-averages the scores first and feeds ``p_conformal``.
    Passing the same source for ``tau_src`` and ``tau_prime_src`` is the
    shared-randomization compatibility mode (two draws per step, concept leg
    first); the default contract is two disjoint substreams.
    """
    for measure in (concept_measure, label_measure):
        if measure not in NN_VARIANTS:
            raise ValueError(f"unknown conformity variant {measure!r}")
    stream = list(stream)
    if not stream:
        raise ValueError("empty stream")
    cache = NnCache()
    p_concept = np.empty(len(stream))
    p_label = np.empty(len(stream))
    for k, obs in enumerate(stream):
        tau = tau_src.uniform_draw()
        tau_prime = tau_prime_src.uniform_draw()
        concept_scores, label_scores, labels = _step_scores(
            cache, obs, concept_measure, label_measure
        )
        p_concept[k] = p_label_conditional(concept_scores, labels, tau)
        p_label[k] = p_conformal(label_scores, tau_prime)
    return InterleavedPValues(
        p_concept, p_label, tau_src.describe(), tau_prime_src.describe()
    )
