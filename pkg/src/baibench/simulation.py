"""
Replicated Monte-Carlo estimation of error-probability curves, confidence
intervals, rates, and minimax aggregation.

Every replication owns two private random streams derived from
(master seed, instance label, algorithm name, replication index) via SHA-256
keyed SeedSequences feeding counter-based Philox generators, so results are
bit-identical for any worker count or scheduling order.
"""

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import beta

from .algorithms import AlgorithmConfig, ConfigError, Sampler, build_sampler
from .instances import get_instance
from .model import EmpiricalState, Instance

RNG_METHOD = "philox4x64 keyed by sha256(instance, algorithm) + replication"


class GaussianEnvironment:
    """Unit-variance Gaussian reward source consuming one normal per pull."""

    def __init__(self, means: np.ndarray, rng: np.random.Generator, block: int = 8192):
        self.means = np.asarray(means, dtype=np.float64)
        self.rng = rng
        self.block = block
        self._buf = rng.standard_normal(block)
        self._pos = 0

    def draw(self, arm: int, n: int) -> float:
        """Sum of n rewards from `arm` (pull order defines stream consumption)."""
        if n == 1 and self._pos < self._buf.size:  # hot path for per-pull samplers
            z = self._buf[self._pos]
            self._pos += 1
            return float(self.means[arm] + z)
        total = 0.0
        need = n
        while need > 0:
            if self._pos == self._buf.size:
                self._buf = self.rng.standard_normal(self.block)
                self._pos = 0
            take = min(need, self._buf.size - self._pos)
            total += float(self._buf[self._pos : self._pos + take].sum())
            self._pos += take
            need -= take
        return float(self.means[arm] * n + total)


class ZeroNoiseEnvironment:
    """Debug environment returning exact means (zero reward variance)."""

    def __init__(self, means: np.ndarray):
        self.means = np.asarray(means, dtype=np.float64)

    def draw(self, arm: int, n: int) -> float:
        return float(self.means[arm] * n)


def replication_rngs(
    master_seed: int, instance_label: str, algorithm: str, replication: int
) -> Tuple[np.random.Generator, np.random.Generator]:
    """(reward stream, algorithm stream) for one replication."""
    digest = hashlib.sha256(f"{instance_label}\x1f{algorithm}".encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    ss = np.random.SeedSequence([int(master_seed), *words, int(replication)])
    reward_ss, algo_ss = ss.spawn(2)
    return (
        np.random.Generator(np.random.Philox(reward_ss)),
        np.random.Generator(np.random.Philox(algo_ss)),
    )


def default_checkpoints(k: int, budget: int, count: int = 50) -> List[int]:
    """`count` log-spaced checkpoints in [K, budget) plus the budget itself."""
    if budget <= k:
        raise ConfigError(f"budget {budget} must exceed the number of arms {k}")
    pts = np.geomspace(k, budget, count + 1)[:count]
    cps = sorted({int(round(x)) for x in pts} | {int(budget)})
    return cps


@dataclass(frozen=True)
class ExperimentConfig:
    """One instance, several algorithm configs, shared budget and seeding."""

    instance: Union[str, Instance]
    algorithms: Dict[str, AlgorithmConfig]
    budget: int
    replications: int
    seed: int
    checkpoints: Optional[Sequence[int]] = None
    workers: int = 1

    def resolve_instance(self) -> Instance:
        if isinstance(self.instance, Instance):
            return self.instance
        return get_instance(self.instance)

    def resolve_checkpoints(self, k: int) -> List[int]:
        if self.checkpoints is None:
            return default_checkpoints(k, self.budget)
        cps = [int(t) for t in self.checkpoints]
        if not cps or any(t <= 0 for t in cps) or cps != sorted(set(cps)):
            raise ConfigError("checkpoints must be strictly increasing positive integers")
        if cps[-1] > self.budget:
            raise ConfigError("checkpoints must not exceed the budget")
        return cps

    def validate(self) -> None:
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if self.budget < 2:
            raise ConfigError("budget must be at least 2")
        if not self.algorithms:
            raise ConfigError("no algorithms configured")
        inst = self.resolve_instance()
        inst.best_arm()  # ground truth must have a unique best arm
        self.resolve_checkpoints(inst.k)
        probe_rng = np.random.default_rng(0)
        for cfg in self.algorithms.values():
            # binding runs schedule feasibility checks (SR/SH/pooled budgets)
            build_sampler(cfg, inst.k, self.budget).bind(inst.k, probe_rng)


def drive(
    sampler: Sampler,
    env,
    k: int,
    checkpoints: Sequence[int],
    algo_rng: np.random.Generator,
) -> np.ndarray:
    """
    Run one sampler against an environment, recording the recommendation at
    every checkpoint. Fixed-budget samplers that finish early keep their final
    recommendation for later checkpoints.
    """
    sampler.bind(k, algo_rng)
    state = EmpiricalState.empty(k)
    recs = np.empty(len(checkpoints), dtype=np.int64)
    ci = 0
    t = 0
    horizon = int(checkpoints[-1])
    while t < horizon:
        seg = sampler.next_segment(state)
        if seg is None:
            break
        arm, n = seg
        n = min(n, int(checkpoints[ci]) - t)
        reward_sum = env.draw(arm, n)
        state.update(arm, n, reward_sum)
        sampler.observe(arm, n, reward_sum)
        t += n
        while ci < len(checkpoints) and checkpoints[ci] == t:
            recs[ci] = sampler.recommend(state)
            ci += 1
    while ci < len(checkpoints):
        recs[ci] = sampler.recommend(state)
        ci += 1
    return recs


def run_replication(config: ExperimentConfig, algorithm: str, replication: int) -> np.ndarray:
    """
    Per-checkpoint error bits (1 = recommendation differs from the true best
    arm) for one replication, fully determined by (seed, instance, algorithm,
    replication).
    """
    inst = config.resolve_instance()
    best = inst.best_arm()
    checkpoints = config.resolve_checkpoints(inst.k)
    cfg = config.algorithms[algorithm]
    reward_rng, algo_rng = replication_rngs(config.seed, inst.label, algorithm, replication)
    env = GaussianEnvironment(inst.means, reward_rng)
    sampler = build_sampler(cfg, inst.k, config.budget)
    recs = drive(sampler, env, inst.k, checkpoints, algo_rng)
    return (recs != best).astype(np.uint8)


@dataclass
class PoECurve:
    """Per-checkpoint error counts and Clopper-Pearson 95% interval."""

    algorithm: str
    instance: str
    t: np.ndarray
    errors: np.ndarray
    replications: int
    poe: np.ndarray = field(init=False)
    ci_low: np.ndarray = field(init=False)
    ci_high: np.ndarray = field(init=False)

    def __post_init__(self):
        self.poe = self.errors / self.replications
        lo, hi = clopper_pearson(self.errors, self.replications)
        self.ci_low = lo
        self.ci_high = hi

    def final(self) -> Tuple[int, float, float, float]:
        """(t, poe, ci_low, ci_high) at the last checkpoint."""
        return int(self.t[-1]), float(self.poe[-1]), float(self.ci_low[-1]), float(self.ci_high[-1])


def clopper_pearson(errors, n: int, level: float = 0.95):
    """Exact binomial two-sided interval; vectorized over error counts."""
    e = np.atleast_1d(np.asarray(errors, dtype=np.float64))
    alpha = 1.0 - level
    with np.errstate(all="ignore"):
        lo = np.where(e > 0, beta.ppf(alpha / 2.0, e, n - e + 1.0), 0.0)
        hi = np.where(e < n, beta.ppf(1.0 - alpha / 2.0, e + 1.0, n - e), 1.0)
    return lo, hi


def _chunk_error_sums(
    config: ExperimentConfig, algorithm: str, start: int, stop: int
) -> np.ndarray:
    total: Optional[np.ndarray] = None
    for rep in range(start, stop):
        bits = run_replication(config, algorithm, rep)
        total = bits.astype(np.int64) if total is None else total + bits
    return total


def _worker(payload) -> Tuple[str, np.ndarray]:
    config, algorithm, start, stop = payload
    return algorithm, _chunk_error_sums(config, algorithm, start, stop)


def estimate_poe(config: ExperimentConfig, workers: Optional[int] = None) -> Dict[str, PoECurve]:
    """
    Replicated PoE estimation for every configured algorithm. Results are
    independent of `workers` (per-replication streams, integer reduction).
    """
    config.validate()
    inst = config.resolve_instance()
    checkpoints = np.asarray(config.resolve_checkpoints(inst.k))
    n_workers = workers if workers is not None else config.workers
    r = config.replications

    sums: Dict[str, np.ndarray] = {}
    if n_workers <= 1:
        for name in config.algorithms:
            sums[name] = _chunk_error_sums(config, name, 0, r)
    else:
        chunk = max(1, math.ceil(r / (n_workers * 4)))
        jobs = [
            (config, name, start, min(start + chunk, r))
            for name in config.algorithms
            for start in range(0, r, chunk)
        ]
        for name in config.algorithms:
            sums[name] = np.zeros(len(checkpoints), dtype=np.int64)
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for name, part in pool.map(_worker, jobs):
                sums[name] += part

    return {
        name: PoECurve(
            algorithm=name,
            instance=inst.label,
            t=checkpoints.copy(),
            errors=sums[name],
            replications=r,
        )
        for name in config.algorithms
    }


def estimate_rate(poe: float, h: float, t: int) -> float:
    """
    H-normalized error exponent h * ln(1/poe) / t. A zero PoE maps to the
    +inf sentinel ("all runs correct"), PoE = 1 to rate 0.
    """
    if h <= 0 or t <= 0:
        raise ValueError("h and t must be positive")
    if poe < 0 or poe > 1:
        raise ValueError("poe must lie in [0, 1]")
    if poe == 0.0:
        return math.inf
    return h * math.log(1.0 / poe) / t


def rate_bounds(poe_low: float, poe: float, poe_high: float, h: float, t: int):
    """(lower, plugin, upper) rates; the upper PoE bound gives the lower rate."""
    return (
        estimate_rate(poe_high, h, t),
        estimate_rate(poe, h, t),
        estimate_rate(poe_low, h, t),
    )


def minimax_rate(rates: Sequence[float]) -> float:
    """Minimum rate, ignoring +inf sentinels unless every entry is +inf."""
    values = list(rates)
    if not values:
        raise ValueError("need at least one rate")
    finite = [x for x in values if not math.isinf(x)]
    return min(finite) if finite else math.inf


def with_workers(config: ExperimentConfig, workers: int) -> ExperimentConfig:
    return replace(config, workers=workers)
