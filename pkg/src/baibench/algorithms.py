"""
Samplers and recommendation rules: Simple Tracking, Almost Tracking, Pooled
Allocation, Successive Rejects, Sequential Halving, doubling wrappers, and the
round-robin uniform baseline.

A sampler is a single-threaded state machine driven pull-segment by
pull-segment (see `Sampler`); the simulation driver owns the cumulative
`EmpiricalState` and may split a requested segment to land on a checkpoint.
Tie-breaking is deterministic everywhere: smallest index for selection and
recommendation, largest index for elimination.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, List, Optional, Sequence, Tuple

import numpy as np

from .allocation import (
    AllocationWorkspace,
    _allocation_into,
    round_allocation,
    target_allocation_h1,
)
from .model import EmpiricalState

log = logging.getLogger(__name__)

WeightFn = Callable[[np.ndarray], np.ndarray]

ANYTIME_KINDS = ("uniform", "simple-tracking", "almost-tracking", "dsr", "dsh")
FIXED_BUDGET_KINDS = ("sr", "sh", "pooled")
ALGORITHM_KINDS = ANYTIME_KINDS + FIXED_BUDGET_KINDS

# Algorithms that discard samples recommend the winner of the last completed
# batch/epoch; the others recommend the cumulative empirical best.
DISCARDING_KINDS = ("sh", "dsh", "dsr")


class ConfigError(ValueError):
    """Invalid algorithm or experiment configuration."""


@dataclass(frozen=True)
class AlgorithmConfig:
    """
    Declarative sampler configuration.

    `budget` may only be set for fixed-budget kinds; the anytime kinds
    (tracking variants, doubling wrappers, uniform) never see a horizon by
    construction. Unset values fall back to kind-specific defaults at build
    time (batch = 2K, c_suf = 0.999, initial_budget = 2 * K * ceil(log2 K)).
    """

    kind: str
    budget: Optional[int] = None
    batch: Optional[int] = None
    c_suf: float = 0.999
    recompute: int = 1
    initial_budget: Optional[int] = None
    batches: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ALGORITHM_KINDS:
            raise ConfigError(f"unknown algorithm kind {self.kind!r}")
        if not 0.0 < self.c_suf < 1.0:
            raise ConfigError("c_suf must lie in (0, 1)")
        if self.recompute < 1:
            raise ConfigError("recompute period must be >= 1")
        if self.budget is not None and self.kind in ANYTIME_KINDS:
            raise ConfigError(f"{self.kind} is anytime: a budget must not be configured")


def empirical_best(state: EmpiricalState) -> int:
    """Cumulative empirical best among pulled arms, smallest index on ties."""
    return state.best_pulled_arm()


def simple_tracking_step(state: EmpiricalState, w_fn: WeightFn = target_allocation_h1) -> int:
    """
    One tracking decision: the arm maximizing w_i(Q) - N_i / t, ties broken by
    smallest index. Requires every arm pulled at least once.
    """
    if np.any(state.counts < 1):
        raise ValueError("simple tracking requires one initial pull per arm")
    deficits = w_fn(state.means()) - state.counts / state.t
    return int(np.argmax(deficits))


class Sampler:
    """Pull-segment state machine interface shared by all algorithms."""

    kind: str = ""
    discarding: bool = False

    def __init__(self):
        self._plan: Deque[Tuple[int, int]] = deque()
        self._finished = False
        self.k = 0
        self.rng: Optional[np.random.Generator] = None

    def bind(self, k: int, rng: np.random.Generator) -> None:
        """Attach arm count and the sampler's private random stream."""
        self.k = k
        self.rng = rng
        self._plan.clear()
        self._finished = False
        self._start()

    def _start(self) -> None:
        pass

    def _plan_more(self, state: EmpiricalState) -> Optional[List[Tuple[int, int]]]:
        """Produce the next planned segments, or None when the run is over."""
        raise NotImplementedError

    def next_segment(self, state: EmpiricalState) -> Optional[Tuple[int, int]]:
        while not self._plan:
            if self._finished:
                return None
            more = self._plan_more(state)
            if more is None:
                self._finished = True
                return None
            self._plan.extend((a, n) for a, n in more if n > 0)
        return self._plan[0]

    def observe(self, arm: int, n: int, reward_sum: float) -> None:
        """Driver feedback: n pulls of `arm` (n never exceeds the offer)."""
        head_arm, head_n = self._plan[0]
        if head_arm != arm or n > head_n:
            raise AssertionError("observations must follow the offered segment")
        if n == head_n:
            self._plan.popleft()
        else:
            self._plan[0] = (head_arm, head_n - n)

    def recommend(self, state: EmpiricalState) -> int:
        return empirical_best(state)


class UniformSampler(Sampler):
    """Round-robin baseline: pull arm t mod K at pull t."""

    kind = "uniform"

    def __init__(self):
        super().__init__()
        self._next_arm = 0

    def _start(self):
        self._next_arm = 0

    def _plan_more(self, state):
        arm = self._next_arm
        self._next_arm = (arm + 1) % self.k
        return [(arm, 1)]


class SimpleTrackingSampler(Sampler):
    """
    Anytime tracking of a target allocation: after one initialization pull per
    arm, repeatedly pull the arm whose realized proportion lags its target
    weight the most. The target is recomputed every `recompute` pulls.
    """

    kind = "simple-tracking"

    def __init__(self, w_fn: WeightFn = target_allocation_h1, recompute: int = 1):
        super().__init__()
        self.w_fn = w_fn
        self.recompute = int(recompute)
        self._ws: Optional[AllocationWorkspace] = None
        self._cached_w: Optional[np.ndarray] = None
        self._since_recompute = 0

    def _start(self):
        self._ws = AllocationWorkspace(self.k)
        self._cached_w = None
        self._since_recompute = 0
        self._pending: Optional[int] = None
        self._deficit = np.empty(self.k)

    def _target(self, state: EmpiricalState) -> np.ndarray:
        if self._cached_w is None or self._since_recompute >= self.recompute:
            means = state.sums / state.counts
            if self.w_fn is target_allocation_h1:
                w = _allocation_into(means, self._ws)
            else:
                w = self.w_fn(means)
            self._cached_w = w
            self._since_recompute = 0
        return self._cached_w

    # Tracking emits one pull at a time; bypassing the generic plan queue
    # keeps the per-step overhead down in large sweeps.
    def next_segment(self, state):
        if self._pending is None:
            if state.t < self.k:
                self._pending = state.t  # draw each arm once, in index order
            else:
                w = self._target(state)
                self._since_recompute += 1
                deficit = np.divide(state.counts, -state.t, out=self._deficit)
                deficit += w
                self._pending = int(np.argmax(deficit))
        return (self._pending, 1)

    def observe(self, arm, n, reward_sum):
        if self._pending != arm or n != 1:
            raise AssertionError("observations must follow the offered segment")
        self._pending = None


@dataclass
class BatchTrace:
    """Per-batch weight rows, realized draws and batch means of a batched run."""

    n: int
    weights: List[np.ndarray] = field(default_factory=list)
    draws: List[np.ndarray] = field(default_factory=list)
    means: List[np.ndarray] = field(default_factory=list)

    @property
    def b(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class AlmostTrackingBatch:
    """Outcome of one Almost Tracking batch decision."""

    weights: np.ndarray
    draws: np.ndarray
    k_insuf: np.ndarray
    s_insuf: float


def almost_tracking_batch(
    trace: BatchTrace,
    w_fn: WeightFn,
    c_suf: float,
    n: int,
    rng: np.random.Generator,
) -> AlmostTrackingBatch:
    """
    Decide batch b >= 2 of Almost Tracking from the recorded trace: arms whose
    average past weight does not exceed target/c_suf form the insufficient
    set, the target is renormalized on it, and the batch of n pulls is rounded
    to integers with the constant-ratio guarantee.

    The pooled mean entering the target is pull-weighted, i.e. the plain
    cumulative empirical mean over all past batches.
    """
    b_prev = trace.b
    if b_prev < 1:
        raise ValueError("the initialization batch must be recorded first")
    pulls = np.sum(trace.draws, axis=0)
    if np.any(pulls < 1):
        raise ValueError("every arm needs past pulls before batch 2")
    pooled_mean = np.sum([d * q for d, q in zip(trace.draws, trace.means)], axis=0) / pulls

    target = w_fn(pooled_mean)
    avg_weight = np.sum(trace.weights, axis=0) / b_prev
    insufficient = avg_weight <= target / c_suf
    # Pigeonhole: if every average exceeded target/c_suf their sum would
    # exceed 1/c_suf > 1.
    if not insufficient.any():
        raise AssertionError("insufficient-arm set is provably non-empty")
    s_insuf = float(target[insufficient].sum())
    weights = np.where(insufficient, target / s_insuf, 0.0)
    draws = round_allocation(weights, n, rng)
    return AlmostTrackingBatch(
        weights=weights, draws=draws, k_insuf=np.flatnonzero(insufficient), s_insuf=s_insuf
    )


class AlmostTrackingSampler(Sampler):
    """
    Batched anytime tracking: each batch of N pulls is shared among the arms
    whose realized average weight lags the current target, in proportion to
    the target restricted to that set.
    """

    kind = "almost-tracking"

    def __init__(
        self,
        w_fn: WeightFn = target_allocation_h1,
        c_suf: float = 0.999,
        batch: Optional[int] = None,
    ):
        super().__init__()
        self.w_fn = w_fn
        self.c_suf = float(c_suf)
        self.batch = batch
        self.trace: Optional[BatchTrace] = None
        self._cur_weights: Optional[np.ndarray] = None
        self._cur_draws: Optional[np.ndarray] = None
        self._cur_counts: Optional[np.ndarray] = None
        self._cur_sums: Optional[np.ndarray] = None

    def _start(self):
        n = self.batch if self.batch is not None else 2 * self.k
        if n < 2 * self.k:
            raise ConfigError(f"almost tracking needs batch >= 2K, got {n}")
        self.n = int(n)
        self.trace = BatchTrace(n=self.n)
        self._cur_draws = None

    def _begin_batch(self, weights: np.ndarray, draws: np.ndarray) -> List[Tuple[int, int]]:
        self._cur_weights = weights
        self._cur_draws = draws
        self._cur_counts = np.zeros(self.k, dtype=np.int64)
        self._cur_sums = np.zeros(self.k)
        return [(int(a), int(n)) for a, n in enumerate(draws) if n > 0]

    def _plan_more(self, state):
        if self.trace.b == 0:
            uniform = np.full(self.k, 1.0 / self.k)
            draws = round_allocation(uniform, self.n, self.rng)
            return self._begin_batch(draws / self.n, draws)  # realized proportions
        decision = almost_tracking_batch(self.trace, self.w_fn, self.c_suf, self.n, self.rng)
        # constant-ratio rounding floor composed with the renormalized
        # target, checked on every simulated batch
        floor = decision.weights * self.n / 4.0
        if np.any(decision.draws < floor - 1e-9):
            raise AssertionError("rounded batch fell below the constant-ratio floor")
        return self._begin_batch(decision.weights, decision.draws)

    def observe(self, arm, n, reward_sum):
        super().observe(arm, n, reward_sum)
        self._cur_counts[arm] += n
        self._cur_sums[arm] += reward_sum
        if not self._plan:  # batch complete: record it in the trace
            means = np.where(
                self._cur_counts > 0, self._cur_sums / np.maximum(self._cur_counts, 1), 0.0
            )
            self.trace.weights.append(self._cur_weights)
            self.trace.draws.append(self._cur_draws)
            self.trace.means.append(means)


class SRSampler(Sampler):
    """
    Successive Rejects: K-1 phases; each phase pulls every surviving arm the
    scheduled number of extra times (cumulative means are kept), then the
    survivor with the lowest cumulative mean is eliminated (largest index on
    ties). The final survivor is the terminal recommendation.
    """

    kind = "sr"

    def __init__(self, budget: int):
        super().__init__()
        self.budget = int(budget)

    def _start(self):
        self.pull_targets = sr_schedule(self.k, self.budget)
        self.survivors = list(range(self.k))
        self.phase = 0
        self.winner: Optional[int] = None
        # SR keeps its own cumulative statistics so eliminations stay correct
        # when the sampler runs as the base of a doubling epoch.
        self._counts = np.zeros(self.k, dtype=np.int64)
        self._sums = np.zeros(self.k)

    def _eliminate(self) -> None:
        means = self._sums[self.survivors] / self._counts[self.survivors]
        worst = np.flatnonzero(means == means.min())
        self.survivors.pop(int(worst[-1]))  # largest index on ties
        if self.phase >= self.k - 1:
            self.winner = self.survivors[0]

    def _plan_more(self, state):
        if self.winner is not None:
            return None
        prev = 0 if self.phase == 0 else int(self.pull_targets[self.phase - 1])
        extra = int(self.pull_targets[self.phase]) - prev
        self.phase += 1
        if extra == 0:
            # small budgets may schedule zero extra pulls: the phase still
            # eliminates on the means already collected
            self._eliminate()
            return []
        return [(arm, extra) for arm in self.survivors]

    def observe(self, arm, n, reward_sum):
        super().observe(arm, n, reward_sum)
        self._counts[arm] += n
        self._sums[arm] += reward_sum
        if not self._plan:  # phase complete
            self._eliminate()

    def recommend(self, state: Optional[EmpiricalState]) -> int:
        if self.winner is not None:
            return self.winner
        pulled = self._counts >= 1
        means = np.where(pulled, self._sums / np.maximum(self._counts, 1), -np.inf)
        return int(np.argmax(means))


def sr_schedule(k: int, budget: int) -> np.ndarray:
    """
    Cumulative per-arm pull targets n_1..n_{K-1} of Successive Rejects:
    n_j = ceil((budget - K) / (logbar(K) * (K + 1 - j))). Later phases may add
    zero pulls when the budget is small; phase 1 must pull every arm at least
    once, and the implied total never exceeds the budget.
    """
    if k < 2:
        raise ConfigError("need at least two arms")
    c = (budget - k) / logbar(k)
    targets = np.ceil(c / (k + 1 - np.arange(1, k, dtype=np.float64))).astype(np.int64)
    if budget <= k or targets[0] < 1:
        raise ConfigError(f"budget {budget} too small for one pull per arm in phase 1")
    total = sr_total_pulls(k, targets)
    if total > budget:
        raise ConfigError(f"schedule infeasible: {total} pulls exceed budget {budget}")
    return targets


def sr_total_pulls(k: int, targets: Sequence[int]) -> int:
    """Total pulls of the SR schedule: sum over phases of survivors * extra."""
    prev = 0
    total = 0
    for j, n_j in enumerate(targets, start=1):
        total += (k + 1 - j) * (int(n_j) - prev)
        prev = int(n_j)
    return total


def logbar(k: int) -> float:
    """The half-plus-harmonic normalizer 1/2 + sum_{i=2..K} 1/i."""
    return 0.5 + float(np.sum(1.0 / np.arange(2, k + 1)))


class SHSampler(Sampler):
    """
    Sequential Halving: ceil(log2 K) rounds; each round pulls every surviving
    arm floor(T / (|S| * ceil(log2 K))) times with fresh means (earlier
    samples are discarded), keeps the top half (smaller index wins ties), and
    recommends the last completed round's leader.
    """

    kind = "sh"
    discarding = True

    def __init__(self, budget: int):
        super().__init__()
        self.budget = int(budget)

    def _start(self):
        self.rounds = int(math.ceil(math.log2(self.k)))
        if self.budget < self.k * self.rounds:
            raise ConfigError(
                f"budget {self.budget} below K*ceil(log2 K) = {self.k * self.rounds}"
            )
        self.survivors = list(range(self.k))
        self.round = 0
        self.last_winner: Optional[int] = None
        self._fresh_counts = np.zeros(self.k, dtype=np.int64)
        self._fresh_sums = np.zeros(self.k)

    def _plan_more(self, state):
        if self.round >= self.rounds or len(self.survivors) == 1:
            return None
        per_arm = self.budget // (len(self.survivors) * self.rounds)
        self._fresh_counts[:] = 0
        self._fresh_sums[:] = 0.0
        self.round += 1
        return [(arm, per_arm) for arm in self.survivors]

    def _halve(self):
        means = self._fresh_sums[self.survivors] / self._fresh_counts[self.survivors]
        order = sorted(range(len(self.survivors)), key=lambda i: (-means[i], self.survivors[i]))
        self.last_winner = self.survivors[order[0]]
        keep = math.ceil(len(self.survivors) / 2)
        self.survivors = sorted(self.survivors[i] for i in order[:keep])

    def observe(self, arm, n, reward_sum):
        super().observe(arm, n, reward_sum)
        self._fresh_counts[arm] += n
        self._fresh_sums[arm] += reward_sum
        if not self._plan:  # round complete: halve on this round's fresh means
            self._halve()

    def recommend(self, state: Optional[EmpiricalState]) -> int:
        if self.last_winner is None:
            log.debug("sh: no completed round yet, falling back to arm 0")
            return 0
        return self.last_winner


class DoublingSampler(Sampler):
    """
    Doubling wrapper turning SR or SH into an anytime algorithm: epoch e runs
    a fresh base instance with budget T_1 * 2^(e-1); leftover epoch budget
    (the base may consume slightly less) is spent re-pulling the base's
    winner so epoch boundaries stay at exact geometric times. The
    recommendation is the last completed epoch's winner, arm 0 before that.
    """

    discarding = True

    def __init__(self, base_kind: str, initial_budget: Optional[int] = None):
        super().__init__()
        if base_kind not in ("sr", "sh"):
            raise ConfigError("doubling wraps sr or sh only")
        self.base_kind = base_kind
        self.kind = "dsr" if base_kind == "sr" else "dsh"
        self.initial_budget = initial_budget

    def _start(self):
        default = 2 * self.k * int(math.ceil(math.log2(self.k)))
        self.t1 = int(self.initial_budget) if self.initial_budget is not None else default
        self.epoch_budget = self.t1
        self.base: Optional[Sampler] = None
        self.last_winner: Optional[int] = None
        self._begin_epoch()

    def _begin_epoch(self):
        self.base = SRSampler(self.epoch_budget) if self.base_kind == "sr" else SHSampler(
            self.epoch_budget
        )
        self.base.bind(self.k, self.rng)
        self.epoch_left = self.epoch_budget

    def _plan_more(self, state):
        seg = self.base.next_segment(None)
        if seg is None:
            # base finished early: pad the epoch to its exact geometric budget
            # by re-pulling the base's winner
            return [(self.base.recommend(None), self.epoch_left)]
        arm, n = seg
        return [(arm, min(n, self.epoch_left))]

    def observe(self, arm, n, reward_sum):
        super().observe(arm, n, reward_sum)
        if self.base._plan:  # padding pulls are not part of the base run
            self.base.observe(arm, n, reward_sum)
        self.epoch_left -= n
        if self.epoch_left == 0:  # epoch closes exactly at the geometric time
            self.last_winner = self.base.recommend(None)
            self.epoch_budget *= 2
            self._begin_epoch()
            self._plan.clear()

    def recommend(self, state: Optional[EmpiricalState]) -> int:
        if self.last_winner is None:
            log.debug("%s: first epoch incomplete, falling back to arm 0", self.kind)
            return 0
        return self.last_winner


class PooledSampler(Sampler):
    """
    Pooled Allocation: after K single-arm initialization batches, every batch
    scores a victory for the pooled-mean leader, draws the rounded target
    allocation, and blends the fresh batch means into the pooled means with
    the fractional weights. Recommends the victory leader.
    """

    kind = "pooled"

    def __init__(
        self,
        budget: int,
        batches: int,
        w_fn: WeightFn = target_allocation_h1,
        recommend_fn: Optional[Callable[[np.ndarray], int]] = None,
    ):
        super().__init__()
        self.budget = int(budget)
        self.batches = int(batches)
        self.w_fn = w_fn
        # scoring rule for pooled means; argmax is the fixed tie-break default
        self.recommend_fn = recommend_fn if recommend_fn is not None else lambda q: int(np.argmax(q))

    def _start(self):
        if self.batches <= self.k:
            raise ConfigError(f"need more batches than arms, got B={self.batches}")
        self.batch_size = self.budget // self.batches  # truncates T to a multiple of B
        if self.batch_size < 2 * self.k:
            raise ConfigError(
                f"batch size {self.batch_size} below 2K: rounding guarantee unavailable"
            )
        self.victories = np.zeros(self.k, dtype=np.int64)
        self.pool: Optional[np.ndarray] = None
        self.batch_index = 0
        self._cur_weights: Optional[np.ndarray] = None
        self._cur_counts = np.zeros(self.k, dtype=np.int64)
        self._cur_sums = np.zeros(self.k)

    def _finish_batch(self, state: EmpiricalState):
        if self.batch_index <= self.k:
            if self.batch_index == self.k:
                self.pool = state.sums / state.counts  # one arm per batch so far
            return
        with np.errstate(invalid="ignore"):
            q_batch = np.where(
                self._cur_counts > 0, self._cur_sums / np.maximum(self._cur_counts, 1), 0.0
            )
        w = self._cur_weights
        self.pool = (1.0 - w) * self.pool + w * q_batch

    def _plan_more(self, state):
        if self.batch_index > 0:
            self._finish_batch(state)
        if self.batch_index >= self.batches:
            return None
        self.batch_index += 1
        if self.batch_index <= self.k:
            return [(self.batch_index - 1, self.batch_size)]
        self.victories[self.recommend_fn(self.pool)] += 1
        self._cur_weights = self.w_fn(self.pool)
        draws = round_allocation(self._cur_weights, self.batch_size, self.rng)
        self._cur_counts[:] = 0
        self._cur_sums[:] = 0.0
        return [(int(a), int(n)) for a, n in enumerate(draws) if n > 0]

    def observe(self, arm, n, reward_sum):
        super().observe(arm, n, reward_sum)
        if self.batch_index > self.k:
            self._cur_counts[arm] += n
            self._cur_sums[arm] += reward_sum

    def recommend(self, state: EmpiricalState) -> int:
        return int(np.argmax(self.victories))


def build_sampler(cfg: AlgorithmConfig, k: int, horizon: Optional[int] = None) -> Sampler:
    """
    Instantiate a sampler from its config. Fixed-budget kinds take their
    budget from the config or, failing that, from the experiment horizon;
    anytime kinds never see the horizon.
    """
    kind = cfg.kind
    if kind == "uniform":
        return UniformSampler()
    if kind == "simple-tracking":
        return SimpleTrackingSampler(recompute=cfg.recompute)
    if kind == "almost-tracking":
        return AlmostTrackingSampler(c_suf=cfg.c_suf, batch=cfg.batch)
    if kind == "dsr":
        return DoublingSampler("sr", cfg.initial_budget)
    if kind == "dsh":
        return DoublingSampler("sh", cfg.initial_budget)
    budget = cfg.budget if cfg.budget is not None else horizon
    if budget is None:
        raise ConfigError(f"{kind} needs a budget")
    if kind == "sr":
        return SRSampler(budget)
    if kind == "sh":
        return SHSampler(budget)
    if kind == "pooled":
        batches = cfg.batches if cfg.batches is not None else max(k + 1, budget // (2 * k))
        return PooledSampler(budget, batches)
    raise ConfigError(f"unknown algorithm kind {kind!r}")


def run_to_completion(sampler: Sampler, env, k: int, rng: np.random.Generator) -> int:
    """Drive a fixed-budget sampler until its plan is exhausted; returns J."""
    sampler.bind(k, rng)
    state = EmpiricalState.empty(k)
    while (segment := sampler.next_segment(state)) is not None:
        arm, n = segment
        reward_sum = env.draw(arm, n)
        state.update(arm, n, reward_sum)
        sampler.observe(arm, n, reward_sum)
    return sampler.recommend(state)


def sr_run(env, k: int, budget: int, rng: Optional[np.random.Generator] = None) -> int:
    """Run Successive Rejects to completion and return the survivor."""
    return run_to_completion(SRSampler(budget), env, k, rng or np.random.default_rng(0))


def sh_run(env, k: int, budget: int, rng: Optional[np.random.Generator] = None) -> int:
    """Run Sequential Halving to completion and return the last winner."""
    return run_to_completion(SHSampler(budget), env, k, rng or np.random.default_rng(0))


def pooled_allocation_run(
    budget: int,
    batches: int,
    env,
    k: int,
    w_fn: WeightFn = target_allocation_h1,
    recommend_fn: Optional[Callable[[np.ndarray], int]] = None,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """Run Pooled Allocation to completion and return the victory leader."""
    sampler = PooledSampler(budget, batches, w_fn=w_fn, recommend_fn=recommend_fn)
    return run_to_completion(sampler, env, k, rng or np.random.default_rng(0))
