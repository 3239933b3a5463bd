"""
Executable oracles for the theory: brute-force minimizers over (Q, P) grids,
bound checkers for D and the H3 band, and the elimination-exponent fitter.

Every check returns a machine-readable CheckResult (pass / fail /
inconclusive plus a witnessing point on failure) and is deterministic given
its grid or seed.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algorithms import AlgorithmConfig, AlmostTrackingSampler, logbar
from .allocation import d_vector, round_allocation, target_allocation_h1
from .instances import synthetic_instance
from .model import Instance, best_arms, h1, h2, h3
from .simulation import (
    ExperimentConfig,
    GaussianEnvironment,
    ZeroNoiseEnvironment,
    drive,
    estimate_poe,
)


@dataclass(frozen=True)
class GridSpec:
    """Coordinate ranges and steps for the Q and P grids of a brute force."""

    q_low: float = -3.0
    q_high: float = 3.0
    q_step: float = 0.05
    p_low: float = -10.0
    p_high: float = 10.0
    p_step: float = 0.1
    misidentification_only: bool = True
    # K=2 refinement along P = (1 - a, a) with Q = (1, 0)
    ray_low: float = 0.5
    ray_high: float = 50.0
    ray_step: float = 0.05


def default_grid(k: int) -> GridSpec:
    """Spec grids: fine for K=2, coarse for K=3 (combinatorial blowup)."""
    if k == 2:
        return GridSpec()
    if k == 3:
        return GridSpec(q_step=0.5, p_step=1.0)
    raise ValueError("brute-force grids support K in {2, 3} only")


@dataclass
class CheckResult:
    """One check outcome: pass/fail/inconclusive, value, witness on failure."""

    name: str
    status: str
    value: Optional[float] = None
    details: Dict = field(default_factory=dict)
    witness: Optional[Dict] = None

    @property
    def failed(self) -> bool:
        return self.status == "fail"


def _axis(low: float, high: float, step: float) -> np.ndarray:
    # exact-ish grid points: one multiply per point, rounded so the
    # degenerate value 1.0 is hit exactly and can be excluded
    count = int(math.floor((high - low) / step + 1e-9)) + 1
    return np.round(low + step * np.arange(count), 12)


def _p_grid_stats(k: int, grid: GridSpec):
    """Flattened P grid with per-point H1, argmax and unique-max mask."""
    axis = _axis(grid.p_low, grid.p_high, grid.p_step)
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    p = np.stack([m.ravel() for m in mesh], axis=1)
    top = p.max(axis=1)
    gaps = top[:, None] - p
    ties = (gaps == 0.0).sum(axis=1)
    valid = ties == 1
    with np.errstate(divide="ignore"):
        h1_vals = np.where(gaps > 0.0, gaps**-2.0, 0.0).sum(axis=1)
    return p, p.argmax(axis=1), valid, h1_vals


def _q_candidates(k: int, grid: GridSpec):
    """
    Q vectors for the joint (Q, P) minimizations: the best value is pinned at
    1 (shift invariance) and arm labels are canonicalized (the P box is
    symmetric, so relabelings are equivalent).
    """
    axis = _axis(grid.q_low, grid.q_high, grid.q_step)
    if k == 2:
        for q2 in axis:
            if q2 < 1.0:  # q2 > 1 is the mirrored configuration
                yield np.array([1.0, float(q2)])
    else:
        for q2 in axis:
            if q2 >= 1.0:
                continue
            for q3 in axis:
                if q3 <= q2:  # arms 2 and 3 are exchangeable
                    yield np.array([1.0, float(q2), float(q3)])


def _q_box(k: int, grid: GridSpec):
    """Full K-dimensional Q grid (no symmetry reduction), all-equal excluded."""
    axis = _axis(grid.q_low, grid.q_high, grid.q_step)
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    for row in points:
        if row.max() > row.min():
            yield row


def brute_force_min_stability(
    k: int, grid: Optional[GridSpec] = None
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Exhaustive grid minimum of the stability functional over misidentifying
    (Q, P) pairs, exploiting shift/scale invariance by pinning Q's best value.
    """
    grid = grid if grid is not None else default_grid(k)
    p, p_arg, p_valid, h1_vals = _p_grid_stats(k, grid)
    best_value = math.inf
    witness: Dict[str, np.ndarray] = {}

    for q in _q_candidates(k, grid):
        dv = d_vector(q)
        q_best = set(best_arms(q))
        mask = p_valid & ~np.isin(p_arg, list(q_best))
        if not mask.any():
            continue
        s = ((q[None, :] - p) ** 2 / dv.d[None, :]).sum(axis=1) * h1_vals
        s = np.where(mask, s, math.inf)
        idx = int(np.argmin(s))
        if s[idx] < best_value:
            best_value = float(s[idx])
            witness = {"q": q.copy(), "p": p[idx].copy()}

    if k == 2:
        # symmetric-ray refinement: Q = (1, 0), P = (1 - a, a)
        for a in _axis(grid.ray_low, grid.ray_high, grid.ray_step):
            if a <= 0.5:
                continue
            p_ray = np.array([1.0 - a, a])
            value = float(
                h1(p_ray) * (((np.array([1.0, 0.0]) - p_ray) ** 2)).sum()
            )  # D = (1, 1) at Q = (1, 0)
            if value < best_value:
                best_value = value
                witness = {"q": np.array([1.0, 0.0]), "p": p_ray}
    return best_value, witness


def brute_force_game_value(
    grid: Optional[GridSpec] = None,
    w_fn: Callable[[np.ndarray], np.ndarray] = target_allocation_h1,
    h_fn: Callable[[np.ndarray], float] = h1,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Grid approximation (K=2 only) of the one-shot-game loss
    inf over misidentifying (Q, P) of H(P) * sum_i w_i(Q) (Q_i - P_i)^2 / 2
    for the supplied allocation function. Diagnostic report only.
    """
    grid = grid if grid is not None else default_grid(2)
    p, p_arg, p_valid, h1_vals = _p_grid_stats(2, grid)
    h_vals = h1_vals if h_fn is h1 else np.array([h_fn(row) if v else 0.0 for row, v in zip(p, p_valid)])
    best_value = math.inf
    witness: Dict[str, np.ndarray] = {}
    for q in _q_candidates(2, grid):
        w = w_fn(q)
        q_best = set(best_arms(q))
        mask = p_valid & ~np.isin(p_arg, list(q_best))
        if not mask.any():
            continue
        loss = (w[None, :] * (q[None, :] - p) ** 2 / 2.0).sum(axis=1) * h_vals
        loss = np.where(mask, loss, math.inf)
        idx = int(np.argmin(loss))
        if loss[idx] < best_value:
            best_value = float(loss[idx])
            witness = {"q": q.copy(), "p": p[idx].copy()}
    return best_value, witness


def check_d_bounds(q_sorted: Sequence[float], perturb_d: float = 0.0) -> CheckResult:
    """
    Verify L_i/4 <= D_i <= L_i for every non-best arm of a descending-sorted
    mean vector, with L_i = (i-1) + sum_{j>i} (gap_i/gap_j)^2 (1-based ranks).
    `perturb_d` multiplies D by (1 + perturb_d) — a fault-injection hook.
    """
    q = np.asarray(q_sorted, dtype=np.float64)
    if np.any(np.diff(q) > 0.0):
        raise ValueError("q must be sorted descending")
    d = d_vector(q).d * (1.0 + perturb_d)
    g = q[0] - q
    failures = []
    for i in range(1, q.size):
        l = i + float(np.sum((g[i] / g[i + 1 :]) ** 2))
        if not (l / 4.0 - 1e-9 <= d[i] <= l + 1e-9):
            failures.append({"arm": i, "d": float(d[i]), "lower": l / 4.0, "upper": l})
    status = "pass" if not failures else "fail"
    return CheckResult(
        name="d-bounds",
        status=status,
        value=float(len(failures)),
        details={"k": int(q.size)},
        witness={"q": q.tolist(), "failures": failures} if failures else None,
    )


def check_h3_band(means: Sequence[float]) -> CheckResult:
    """Ratio h3 / h2(gaussian) must lie in (1/2, 1]."""
    ratio = h3(means) / h2(means, gaussian_factor=True)
    ok = 0.5 < ratio <= 1.0 + 1e-12
    return CheckResult(
        name="h3-band",
        status="pass" if ok else "fail",
        value=float(ratio),
        witness=None if ok else {"means": list(map(float, means)), "ratio": float(ratio)},
    )


@dataclass
class SrExponentFit:
    """Fitted decay slope of -ln PoE versus budget for Successive Rejects."""

    status: str  # "conclusive" | "inconclusive"
    slope: Optional[float]
    predicted: float
    relative_deviation: Optional[float]
    points: List[Dict]


def fit_sr_exponent(
    instance: Instance,
    budgets: Sequence[int],
    replications: int,
    seed: int = 0,
    workers: int = 1,
    min_events: int = 20,
    zero_noise: bool = False,
) -> SrExponentFit:
    """
    Estimate PoE of SR at each budget, fit the least-squares slope of
    -ln PoE against T, and compare with the predicted 1/(H3 * logbar(K)).

    Points with fewer than `min_events` error events make the fit
    inconclusive (the slope is still reported over the usable points).
    """
    if len(budgets) < 4:
        raise ValueError("need a sweep of at least 4 budgets")
    k = instance.k
    predicted = 1.0 / (h3(instance.means) * logbar(k))
    points: List[Dict] = []
    for t in budgets:
        if zero_noise:
            env = ZeroNoiseEnvironment(instance.means)
            from .algorithms import SRSampler

            sampler = SRSampler(int(t))
            recs = drive(sampler, env, k, [int(t)], np.random.default_rng(0))
            errors, n = int(recs[-1] != instance.best_arm()) * replications, replications
        else:
            cfg = ExperimentConfig(
                instance=instance,
                algorithms={"sr": AlgorithmConfig(kind="sr")},
                budget=int(t),
                replications=replications,
                seed=seed,
                checkpoints=[int(t)],
            )
            curve = estimate_poe(cfg, workers=workers)["sr"]
            errors, n = int(curve.errors[-1]), replications
        points.append({"budget": int(t), "errors": errors, "replications": n})

    usable = [pt for pt in points if pt["errors"] > 0]
    slope = None
    if len(usable) >= 2:
        ts = np.array([pt["budget"] for pt in usable], dtype=float)
        ys = np.array([-math.log(pt["errors"] / pt["replications"]) for pt in usable])
        slope = float(np.polyfit(ts, ys, 1)[0])
    conclusive = all(pt["errors"] >= min_events for pt in points)
    return SrExponentFit(
        status="conclusive" if conclusive else "inconclusive",
        slope=slope,
        predicted=predicted,
        relative_deviation=None if slope is None else abs(slope - predicted) / predicted,
        points=points,
    )


def tracking_inf_bound(instance: Instance, grid: Optional[GridSpec] = None) -> float:
    """
    Grid inf over misidentifying Q of sum_i w*_i(Q) (Q_i - P_i)^2 / 2: the
    right-hand side of the batched-tracking bound. K in {2, 3}.
    """
    k = instance.k
    grid = grid if grid is not None else default_grid(k)
    best_p = instance.best_arm()
    rhs = math.inf
    for q in _q_box(k, grid):
        if best_p in best_arms(q):
            continue
        w = target_allocation_h1(q)
        rhs = min(rhs, float(np.sum(w * (q - instance.means) ** 2 / 2.0)))
    if not math.isfinite(rhs) or rhs <= 0.0:
        raise AssertionError("misidentification grid for the trackability bound is empty")
    return rhs


def trackability_ratio(
    instance: Instance,
    seed: int,
    batches: int = 30,
    grid: Optional[GridSpec] = None,
    inf_bound: Optional[float] = None,
) -> float:
    """
    Diagnostic for the batched-tracking bound: ratio of the averaged batch
    loss (1/B) sum_b sum_i w_{b,i} (Q_{b,i} - P_i)^2 / 2 of a recorded
    Almost Tracking trace to `tracking_inf_bound` (pass it precomputed when
    evaluating many traces of one instance).
    """
    k = instance.k
    n = 2 * k
    sampler = AlmostTrackingSampler(batch=n)
    env = GaussianEnvironment(
        instance.means, np.random.Generator(np.random.Philox([seed, 101]))
    )
    drive(sampler, env, k, [batches * n], np.random.Generator(np.random.Philox([seed, 202])))
    trace = sampler.trace
    lhs = 0.0
    for w_row, q_row in zip(trace.weights, trace.means):
        live = w_row > 0.0
        lhs += float(np.sum(w_row[live] * (q_row[live] - instance.means[live]) ** 2 / 2.0))
    lhs /= trace.b
    rhs = inf_bound if inf_bound is not None else tracking_inf_bound(instance, grid)
    return lhs / rhs


def _random_mean_vector(rng: np.random.Generator, k_max: int) -> np.ndarray:
    k = int(rng.integers(2, k_max + 1))
    return rng.normal(size=k)


def check_rounding_suite(samples: int = 10000, seed: int = 1) -> CheckResult:
    """Randomized constant-ratio rounding guarantees (integers, sum, floor)."""
    rng = np.random.default_rng(seed)
    violations = []
    for i in range(samples):
        k = int(rng.integers(2, 65))
        w = rng.dirichlet(np.full(k, 0.5))
        n = int(rng.integers(2 * k, 8 * k))
        pulls = round_allocation(w, n, rng)
        ok = pulls.dtype.kind == "i" and int(pulls.sum()) == n and np.all(
            pulls >= w * n / 4.0 - 1e-9
        )
        if not ok:
            violations.append({"sample": i, "k": k, "n": n})
            if len(violations) >= 5:
                break
    return CheckResult(
        name="rounding",
        status="pass" if not violations else "fail",
        value=float(len(violations)),
        details={"samples": samples},
        witness={"violations": violations} if violations else None,
    )


def check_allocation_suite(
    samples: int = 10000, seed: int = 2, perturb_d: float = 0.0
) -> CheckResult:
    """Randomized simplex / positivity / floor / D-sandwich / Z-band checks."""
    rng = np.random.default_rng(seed)
    violations = []
    for i in range(samples):
        q = np.sort(_random_mean_vector(rng, 64))[::-1]
        k = q.size
        dv = d_vector(q)
        d = dv.d * (1.0 + perturb_d)
        z = float(np.sum(1.0 / d))
        w = 1.0 / (d * z)
        problems = []
        if abs(w.sum() - 1.0) > 1e-12:
            problems.append("simplex")
        if not np.all(w > 0.0):
            problems.append("positivity")
        if not np.all(w >= 1.0 / (4.0 * k * (2.0 + math.log(k)))):
            problems.append("floor")
        g = q[0] - q
        for pos in range(1, k):
            l = pos + float(np.sum((g[pos] / g[pos + 1 :]) ** 2))
            if not (l / 4.0 - 1e-9 <= d[pos] <= l + 1e-9):
                problems.append("sandwich")
                break
        if not (0.25 - 1e-12 <= z <= 4.0 * (2.0 + math.log(k)) + 1e-12):
            problems.append("z-band")
        if problems:
            violations.append({"sample": i, "k": k, "problems": problems})
            if len(violations) >= 5:
                break
    return CheckResult(
        name="allocation",
        status="pass" if not violations else "fail",
        value=float(len(violations)),
        details={"samples": samples},
        witness={"violations": violations} if violations else None,
    )


def check_h3_band_suite(randomized: int = 1000, seed: int = 3) -> List[CheckResult]:
    """The band on the ten synthetic instances plus randomized ones."""
    results = []
    for i in range(1, 11):
        res = check_h3_band(synthetic_instance(i).means)
        res.name = f"h3-band-instance-{i}"
        results.append(res)
    rng = np.random.default_rng(seed)
    worst: Optional[CheckResult] = None
    failures = 0
    for _ in range(randomized):
        means = _random_mean_vector(rng, 40)
        if len(best_arms(means)) != 1:
            continue
        res = check_h3_band(means)
        if res.failed:
            failures += 1
            worst = res
    summary = CheckResult(
        name="h3-band-randomized",
        status="pass" if failures == 0 else "fail",
        value=float(failures),
        details={"samples": randomized},
        witness=None if failures == 0 else worst.witness,
    )
    results.append(summary)
    return results


def check_stability_floor(grid: Optional[GridSpec] = None) -> CheckResult:
    """K=2 brute-force stability minimum must land in [0.5, 0.52]."""
    value, witness = brute_force_min_stability(2, grid)
    ok = 0.5 <= value <= 0.52
    return CheckResult(
        name="stability-floor-k2",
        status="pass" if ok else "fail",
        value=value,
        witness=None if ok else {k: v.tolist() for k, v in witness.items()},
    )


def check_sr_exponent(
    budgets: Sequence[int] = (40, 80, 120, 160, 200),
    replications: int = 100000,
    seed: int = 4,
    workers: int = 1,
) -> CheckResult:
    """Two-arm elimination exponent versus the predicted 1/(H3 * logbar)."""
    instance = Instance(means=[1.0, 0.0], label="sr-exponent")
    fit = fit_sr_exponent(instance, budgets, replications, seed=seed, workers=workers)
    if fit.status == "inconclusive":
        status = "inconclusive"
    else:
        status = "pass" if fit.relative_deviation <= 0.2 else "fail"
    return CheckResult(
        name="sr-exponent",
        status=status,
        value=fit.slope,
        details={
            "predicted": fit.predicted,
            "relative_deviation": fit.relative_deviation,
            "points": fit.points,
        },
        witness=None if status != "fail" else {"points": fit.points},
    )


SUITES = ("allocation", "h3", "stability", "sr-exponent", "all")


def run_suite(
    suite: str,
    samples: int = 10000,
    sr_replications: int = 100000,
    seed: int = 0,
    workers: int = 1,
    perturb_d: float = 0.0,
) -> List[CheckResult]:
    """Run one named check suite (or all of them) and collect the results."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    results: List[CheckResult] = []
    if suite in ("allocation", "all"):
        results.append(check_rounding_suite(samples=samples, seed=seed + 1))
        results.append(check_allocation_suite(samples=samples, seed=seed + 2, perturb_d=perturb_d))
    if suite in ("h3", "all"):
        results.extend(check_h3_band_suite(randomized=min(samples, 1000), seed=seed + 3))
    if suite in ("stability", "all"):
        results.append(check_stability_floor())
    if suite in ("sr-exponent", "all"):
        results.append(
            check_sr_exponent(replications=sr_replications, seed=seed + 4, workers=workers)
        )
    return results
