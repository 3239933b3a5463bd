"""
Ground-truth instances, empirical statistics, gap vectors, and the three
complexity measures H1 / H2 / H3.

All arm indices are 0-based. Means are plain floats (unit reward variance is
assumed throughout the package).
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np


class DegenerateInstanceError(ValueError):
    """Raised when a quantity is undefined because the best arm is tied."""


def _as_means(means: Sequence[float]) -> np.ndarray:
    arr = np.asarray(means, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("means must be a 1-d vector with at least 2 arms")
    if not np.all(np.isfinite(arr)):
        raise ValueError("means must be finite")
    return arr


@dataclass(frozen=True)
class Instance:
    """A ground-truth bandit instance: true arm means plus a label."""

    means: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "means", _as_means(self.means))

    @property
    def k(self) -> int:
        return int(self.means.size)

    def best_arm(self) -> int:
        """The unique best arm; raises if the maximum is tied."""
        best = best_arms(self.means)
        if len(best) != 1:
            raise DegenerateInstanceError(
                f"instance {self.label!r} has {len(best)} tied best arms"
            )
        return best[0]


@dataclass
class EmpiricalState:
    """Per-arm pull counts and reward sums; everything an algorithm may observe."""

    counts: np.ndarray
    sums: np.ndarray
    t: int = 0

    @classmethod
    def empty(cls, k: int) -> "EmpiricalState":
        return cls(np.zeros(k, dtype=np.int64), np.zeros(k, dtype=np.float64), 0)

    @property
    def k(self) -> int:
        return int(self.counts.size)

    def update(self, arm: int, n: int, reward_sum: float) -> None:
        """Record n pulls of one arm with the given total reward."""
        self.counts[arm] += n
        self.sums[arm] += reward_sum
        self.t += n

    def mean(self, arm: int) -> float:
        if self.counts[arm] < 1:
            raise ValueError(f"arm {arm} has no pulls; empirical mean undefined")
        return float(self.sums[arm] / self.counts[arm])

    def means(self) -> np.ndarray:
        """Empirical mean vector; requires every arm pulled at least once."""
        if np.any(self.counts < 1):
            raise ValueError("empirical means undefined: some arm has no pulls")
        return self.sums / self.counts

    def best_pulled_arm(self) -> int:
        """Empirical best among pulled arms, smallest index on ties."""
        pulled = self.counts >= 1
        if not pulled.any():
            raise ValueError("no arm has been pulled")
        means = np.where(pulled, self.sums / np.maximum(self.counts, 1), -np.inf)
        return int(np.argmax(means))


@dataclass(frozen=True)
class GapVector:
    """Suboptimality gaps max_j m_j - m_i and the set of maximizing indices."""

    gaps: np.ndarray
    best_set: List[int] = field(default_factory=list)


def best_arms(means: Sequence[float]) -> List[int]:
    """
    All indices attaining the maximum of `means` (exact-equality ties included).

    Returns a sorted, non-empty list of 0-based indices.
    """
    arr = _as_means(means)
    top = arr.max()
    return [int(i) for i in np.flatnonzero(arr == top)]


def gaps(means: Sequence[float]) -> GapVector:
    """Gap vector Delta_i = max(means) - means_i, computed in one pass."""
    arr = _as_means(means)
    top = arr.max()
    return GapVector(gaps=top - arr, best_set=[int(i) for i in np.flatnonzero(arr == top)])


def _unique_gaps(means: Sequence[float]) -> np.ndarray:
    gv = gaps(means)
    if len(gv.best_set) != 1:
        raise DegenerateInstanceError("complexity measure undefined: tied best arms")
    return gv.gaps


def h1(means: Sequence[float]) -> float:
    """Sum over suboptimal arms of the inverse squared gap."""
    g = _unique_gaps(means)
    sub = g[g > 0.0]
    return float(np.sum(sub ** -2.0))


def h2(means: Sequence[float], gaussian_factor: bool = False) -> float:
    """
    Worst index-scaled inverse squared sorted gap: max over i >= 2 of
    i * gap_(i)^-2 with gaps sorted ascending (so gap_(2) is the second-best
    arm's gap). With `gaussian_factor` the result is multiplied by 4, the
    unit-variance Gaussian variant used by the H3 band check.
    """
    g = np.sort(_unique_gaps(means))
    k = g.size
    ranks = np.arange(2, k + 1, dtype=np.float64)
    value = float(np.max(ranks * g[1:] ** -2.0))
    return 4.0 * value if gaussian_factor else value


def modified_mean(sorted_means: Sequence[float], j: int) -> float:
    """
    The self-consistent average of the top arm and the below-threshold members
    of the top-j arms.

    `sorted_means` must be sorted descending; j is the number of top arms
    considered, 2 <= j <= K. The result m is the unique value in
    [sorted_means[j-1], sorted_means[0]] equal to the average of
    {arm 1} union {arm i in 2..j : mean_i <= m}.
    """
    arr = _as_means(sorted_means)
    if np.any(np.diff(arr) > 0.0):
        raise ValueError("means must be sorted descending")
    if not 2 <= j <= arr.size:
        raise ValueError(f"j must be in [2, {arr.size}], got {j}")

    top = arr[0]
    tail = arr[1:j]  # candidates for inclusion, descending
    # Scan inclusion sets from the smallest suffix upward. The fixed-point
    # value is unique, but when a mean ties the average exactly, adjacent
    # suffixes describe the same value, so consistency is checked with a
    # small tolerance and all surviving candidates must agree.
    tol = 1e-9 * max(1.0, float(np.max(np.abs(arr[:j]))))
    solutions = []
    for m in range(1, j):
        included = tail[j - 1 - m:]  # the m smallest of the tail
        mean = (top + included.sum()) / (m + 1)
        if np.all(included <= mean + tol) and (
            m == j - 1 or np.all(tail[: j - 1 - m] > mean - tol)
        ):
            solutions.append(float(mean))
    if not solutions:
        raise AssertionError("no self-consistent modified mean found")
    if max(solutions) - min(solutions) > 1e-6 * max(1.0, abs(solutions[0])):
        raise AssertionError("modified mean fixed point is not unique")
    return solutions[-1]


def h3(means: Sequence[float]) -> float:
    """
    The elimination-schedule complexity built from modified means: the max
    over j in 2..K of 2j / sum of squared modified gaps of the top-j arms.
    """
    _unique_gaps(means)  # unique-best precondition
    arr = np.sort(_as_means(means))[::-1]
    k = arr.size
    best_value = 0.0
    for j in range(2, k + 1):
        m = modified_mean(arr, j)
        d_top = arr[0] - m
        d_rest = np.clip(m - arr[1:j], 0.0, None)
        denom = d_top ** 2 + float(np.sum(d_rest ** 2))
        best_value = max(best_value, 2.0 * j / denom)
    return best_value
