"""Mergeable per-level moment accumulators and derived diagnostics.

Accumulation keeps raw power sums of the level differences (and first two
powers of the fine values), so merging partial results is plain componentwise
addition: associative, commutative, and independent of how samples were
scheduled.  Central moments are formed by shifting with the sample mean at
read time; the catastrophic-cancellation risk of raw sums is accepted for
mergeability and tiny negative variances are clamped to zero with a warning.

The cost unit is the count of normal variates consumed, never wall-clock.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class UndefinedKurtosisError(ValueError):
    """Kurtosis is undefined: zero variance or fewer than 4 samples."""


@dataclass(frozen=True)
class LevelStats:
    """Raw power sums of level-difference samples plus cost tallies."""

    count: int = 0
    s1: float = 0.0
    s2: float = 0.0
    s3: float = 0.0
    s4: float = 0.0
    fine_s1: float = 0.0
    fine_s2: float = 0.0
    total_rng_cost: int = 0

    # -- accumulation ---------------------------------------------------

    def is_empty(self) -> bool:
        return self.count == 0

    # -- derived statistics ---------------------------------------------

    @property
    def mean_diff(self) -> float:
        return self.s1 / self.count

    @property
    def var_diff(self) -> float:
        return self._variance(self.s1, self.s2)

    @property
    def mean_fine(self) -> float:
        return self.fine_s1 / self.count

    @property
    def var_fine(self) -> float:
        return self._variance(self.fine_s1, self.fine_s2)

    @property
    def mean_cost(self) -> float:
        return self.total_rng_cost / self.count

    def _variance(self, s1: float, s2: float) -> float:
        if self.count < 2:
            return 0.0
        mean = s1 / self.count
        m2 = s2 / self.count - mean * mean
        var = m2 * self.count / (self.count - 1)
        if var < 0.0:
            if var < -1e-12 * max(1.0, abs(s2 / self.count)):
                warnings.warn("variance estimate clamped to zero "
                              "(catastrophic cancellation in raw sums)")
            return 0.0
        return var

    def kurtosis(self) -> float:
        """Fourth central moment over squared second central moment."""
        if self.count < 4:
            raise UndefinedKurtosisError("kurtosis needs at least 4 samples")
        mean = self.mean_diff
        n = self.count
        m2 = self.s2 / n - mean * mean
        if m2 <= 0.0:
            raise UndefinedKurtosisError("kurtosis undefined for zero variance")
        m4 = (self.s4 - 4.0 * mean * self.s3 + 6.0 * mean * mean * self.s2) / n \
            - 3.0 * mean ** 4
        return m4 / (m2 * m2)


def record(stats: LevelStats, sample) -> LevelStats:
    """Fold one level sample (anything with diff, fine_value, rng_cost) in."""
    d = sample.diff
    return LevelStats(
        count=stats.count + 1,
        s1=stats.s1 + d,
        s2=stats.s2 + d * d,
        s3=stats.s3 + d * d * d,
        s4=stats.s4 + d * d * d * d,
        fine_s1=stats.fine_s1 + sample.fine_value,
        fine_s2=stats.fine_s2 + sample.fine_value * sample.fine_value,
        total_rng_cost=stats.total_rng_cost + sample.rng_cost,
    )


def record_batch(stats: LevelStats, diffs: np.ndarray, fines: np.ndarray,
                 costs: np.ndarray) -> LevelStats:
    """Fold a whole batch in at once (one fixed-order reduction per power)."""
    d = np.asarray(diffs, dtype=float)
    f = np.asarray(fines, dtype=float)
    d2 = d * d
    return LevelStats(
        count=stats.count + d.size,
        s1=stats.s1 + float(d.sum()),
        s2=stats.s2 + float(d2.sum()),
        s3=stats.s3 + float((d2 * d).sum()),
        s4=stats.s4 + float((d2 * d2).sum()),
        fine_s1=stats.fine_s1 + float(f.sum()),
        fine_s2=stats.fine_s2 + float((f * f).sum()),
        total_rng_cost=stats.total_rng_cost + int(np.sum(costs)),
    )


def merge(a: LevelStats, b: LevelStats) -> LevelStats:
    """Componentwise addition; associative and commutative."""
    return LevelStats(
        count=a.count + b.count,
        s1=a.s1 + b.s1,
        s2=a.s2 + b.s2,
        s3=a.s3 + b.s3,
        s4=a.s4 + b.s4,
        fine_s1=a.fine_s1 + b.fine_s1,
        fine_s2=a.fine_s2 + b.fine_s2,
        total_rng_cost=a.total_rng_cost + b.total_rng_cost,
    )


def normalized_cost(stats: LevelStats, spec, h: float) -> float:
    """Cost per sample as a fraction of the full-horizon single-path budget.

    The baseline is noise_dim / h normal variates, the number one path needs
    to march a unit time interval at step h.
    """
    if stats.count < 1:
        raise ValueError("no samples recorded")
    return stats.mean_cost / (spec.noise_dim / h)
