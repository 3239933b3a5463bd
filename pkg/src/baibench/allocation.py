"""
The closed-form H1 target allocation, the constant-ratio integer rounding of
fractional pull counts, and the stability functional used by the theory checks.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import DegenerateInstanceError, _as_means, h1


@dataclass(frozen=True)
class DVector:
    """Per-arm divisors D_i plus the normalization Z = sum of 1/D_i."""

    d: np.ndarray
    z: float


class AllocationWorkspace:
    """Reusable buffers for repeated target-allocation evaluations (hot loops)."""

    def __init__(self, k: int):
        self.k = k
        self.gaps = np.empty(k)
        self.pair = np.empty((k, k))
        self.h1p = np.empty(k)
        self.d = np.empty(k)
        self.w = np.empty(k)
        self._diag = np.arange(k)


def h1_prime(i: int, q: Sequence[float]) -> float:
    """
    Hardness of the hypothetical world where arm i is raised to the top:
    sum over j != i of 1/(gap_j + gap_i)^2.

    Returns +inf when arm i is itself a (possibly tied) best arm; callers
    that build allocations never evaluate it there.
    """
    arr = _as_means(q)
    g = arr.max() - arr
    terms = g + g[i]
    mask = np.arange(arr.size) != i
    with np.errstate(divide="ignore"):
        values = terms[mask] ** -2.0
    return float(np.sum(values))


def _d_into(q: np.ndarray, ws: AllocationWorkspace) -> np.ndarray:
    """Compute D into ws.d for a non-degenerate mean vector q."""
    g = np.subtract(q.max(), q, out=ws.gaps)
    nonbest = g > 0.0
    if not nonbest.any():
        raise DegenerateInstanceError("all empirical means equal: D undefined")
    with np.errstate(divide="ignore", invalid="ignore"):
        pair = np.add(g[:, None], g[None, :], out=ws.pair)
        np.multiply(pair, pair, out=pair)
        np.reciprocal(pair, out=pair)
        pair[ws._diag, ws._diag] = 0.0
        h1p = pair.sum(axis=1, out=ws.h1p)
        d = np.multiply(g, g, out=ws.d)
        np.multiply(d, h1p, out=d)  # tied best arms: 0 * inf, overwritten below
    # Best arms (gap 0) take the minimum D over non-best arms; this also
    # covers tied empirical best sets, whose h1p rows are infinite.
    d_min = d[nonbest].min()
    d[~nonbest] = d_min
    return d


def d_vector(q: Sequence[float]) -> DVector:
    """
    D_i = gap_i^2 * h1_prime(i) for non-best arms; every best arm receives the
    minimum D over non-best arms. Raises on an all-equal vector.
    """
    arr = _as_means(q)
    d = _d_into(arr, AllocationWorkspace(arr.size)).copy()
    return DVector(d=d, z=float(np.sum(1.0 / d)))


def _allocation_into(q: np.ndarray, ws: AllocationWorkspace) -> np.ndarray:
    """Hot-loop variant of target_allocation_h1: trusted input, shared buffers."""
    d = _d_into(q, ws)
    w = np.reciprocal(d, out=ws.w)
    np.multiply(w, 1.0 / w.sum(), out=w)
    return w


def target_allocation_h1(
    q: Sequence[float], workspace: Optional[AllocationWorkspace] = None
) -> np.ndarray:
    """
    The closed-form H1 target allocation w_i = 1/(D_i * Z): an exact simplex
    point, strictly positive, deterministic in q.

    Passing a preallocated `workspace` avoids per-call allocations; the
    returned array is then a view into the workspace and must be copied if
    kept across calls.
    """
    arr = _as_means(q)
    ws = workspace if workspace is not None else AllocationWorkspace(arr.size)
    w = _allocation_into(arr, ws)
    return w if workspace is not None else w.copy()


def round_allocation(w: Sequence[float], n_total: int, rng: np.random.Generator) -> np.ndarray:
    """
    Convert fractional pulls w * n_total into integers with the constant-ratio
    guarantee: entries are integers, sum exactly to n_total, and every entry
    is at least w_i * n_total / 4.

    Supported arms get 1 + floor(w_i * (n_total - #support)) pulls, then the
    remainder is topped off by sampling arms with probability w_i from `rng`
    (bit-for-bit reproducible for a fixed stream).
    """
    arr = np.asarray(w, dtype=np.float64)
    k = arr.size
    if n_total < 2 * k:
        raise ValueError(f"n_total={n_total} below 2K={2 * k}: rounding guarantee unproven")
    if arr.min() < 0.0 or abs(arr.sum() - 1.0) > 1e-9:
        raise ValueError("w must be a point on the simplex")

    support = arr > 0.0
    n_prime = n_total - int(support.sum())
    pulls = np.where(support, 1 + np.floor(arr * n_prime), 0.0).astype(np.int64)
    short = n_total - int(pulls.sum())
    if short > 0:
        cdf = np.cumsum(arr)
        cdf[-1] = 1.0  # guard against accumulated rounding
        for _ in range(short):
            pulls[int(np.searchsorted(cdf, rng.random(), side="right"))] += 1
    return pulls


def stability(q: Sequence[float], p: Sequence[float]) -> float:
    """
    The stability functional S(q, p) = H1(p) * sum_i (q_i - p_i)^2 / D_i(q).

    No misidentification constraint is enforced here; grid searches filter on
    best(p) not in best(q) themselves.
    """
    q_arr = _as_means(q)
    p_arr = _as_means(p)
    if q_arr.size != p_arr.size:
        raise ValueError("q and p must have the same length")
    d = d_vector(q_arr).d
    return float(h1(p_arr) * np.sum((q_arr - p_arr) ** 2 / d))
