"""Sampler state machines: tracking variants, elimination baselines, wrappers."""

import numpy as np
import pytest

from baibench.algorithms import (
    ALGORITHM_KINDS,
    AlgorithmConfig,
    AlmostTrackingSampler,
    BatchTrace,
    ConfigError,
    DoublingSampler,
    PooledSampler,
    SHSampler,
    SRSampler,
    SimpleTrackingSampler,
    UniformSampler,
    almost_tracking_batch,
    build_sampler,
    empirical_best,
    logbar,
    simple_tracking_step,
    sr_schedule,
    sr_total_pulls,
)
from baibench.model import EmpiricalState
from baibench.simulation import GaussianEnvironment, ZeroNoiseEnvironment, drive


def make_state(counts, means):
    counts = np.asarray(counts, dtype=np.int64)
    sums = np.asarray(means, dtype=float) * counts
    return EmpiricalState(counts=counts, sums=sums, t=int(counts.sum()))


def run_to_end(sampler, env, k, horizon, seed=0):
    recs = drive(sampler, env, k, [horizon], np.random.Generator(np.random.Philox(seed)))
    return int(recs[-1])


# --- simple tracking -----------------------------------------------------------

def test_simple_tracking_step_traces():
    state = make_state([1, 1], [0.0, 0.0])
    assert simple_tracking_step(state, lambda q: np.array([0.7, 0.3])) == 0
    assert simple_tracking_step(state, lambda q: np.array([0.5, 0.5])) == 0  # tie: smallest
    state3 = make_state([5, 3, 2], [0.0, 0.0, 0.0])
    assert simple_tracking_step(state3, lambda q: np.array([0.2, 0.3, 0.5])) == 2


def test_simple_tracking_step_requires_initialization():
    with pytest.raises(ValueError):
        simple_tracking_step(make_state([1, 0], [0.0, 0.0]))


def test_simple_tracking_initializes_every_arm_then_tracks():
    sampler = SimpleTrackingSampler()
    env = ZeroNoiseEnvironment(np.array([1.0, 0.5, 0.0]))
    rec = run_to_end(sampler, env, 3, 60)
    assert rec == 0


def test_simple_tracking_recompute_knob_changes_cost_not_contract():
    env = ZeroNoiseEnvironment(np.array([1.0, 0.5, 0.0]))
    assert run_to_end(SimpleTrackingSampler(recompute=5), env, 3, 60) == 0


# --- almost tracking -----------------------------------------------------------

def test_almost_tracking_batch_focuses_lagging_arm():
    trace = BatchTrace(n=4)
    trace.weights.append(np.array([0.5, 0.5]))
    trace.draws.append(np.array([2, 2]))
    trace.means.append(np.array([1.0, 0.0]))
    decision = almost_tracking_batch(
        trace, lambda q: np.array([0.7, 0.3]), 0.999, 4, np.random.default_rng(0)
    )
    np.testing.assert_array_equal(decision.k_insuf, [0])
    np.testing.assert_allclose(decision.weights, [1.0, 0.0])
    np.testing.assert_array_equal(decision.draws, [4, 0])


def test_almost_tracking_batch_keeps_balanced_arms():
    trace = BatchTrace(n=4)
    trace.weights.append(np.array([0.5, 0.5]))
    trace.draws.append(np.array([2, 2]))
    trace.means.append(np.array([1.0, 0.0]))
    decision = almost_tracking_batch(
        trace, lambda q: np.array([0.5, 0.5]), 0.999, 4, np.random.default_rng(0)
    )
    np.testing.assert_array_equal(decision.k_insuf, [0, 1])
    np.testing.assert_array_equal(decision.draws, [2, 2])


def test_almost_tracking_run_batches_sum_to_n():
    k, n = 3, 6
    sampler = AlmostTrackingSampler(batch=n)
    env = GaussianEnvironment(np.array([1.0, 0.5, 0.0]), np.random.default_rng(3))
    drive(sampler, env, k, [60], np.random.Generator(np.random.Philox(1)))
    assert all(int(d.sum()) == n for d in sampler.trace.draws)
    assert len(sampler.trace.draws) == 10
    # insufficient set was never empty and the floor held on every batch >= 2
    for b in range(1, sampler.trace.b):
        w = sampler.trace.weights[b]
        assert w.sum() == pytest.approx(1.0)
        mask = w > 0
        assert mask.any()
        assert np.all(sampler.trace.draws[b][mask] >= w[mask] * n / 4.0 - 1e-9)


def test_almost_tracking_rejects_small_batch():
    sampler = AlmostTrackingSampler(batch=5)
    with pytest.raises(ConfigError):
        sampler.bind(3, np.random.default_rng(0))


# --- sr ------------------------------------------------------------------------

def test_sr_schedule_k3():
    targets = sr_schedule(3, 20)
    assert logbar(3) == pytest.approx(4.0 / 3.0)
    np.testing.assert_array_equal(targets, [5, 7])
    assert sr_total_pulls(3, targets) == 19


def test_sr_schedule_k2():
    targets = sr_schedule(2, 100)
    assert logbar(2) == pytest.approx(1.0)
    np.testing.assert_array_equal(targets, [49])
    assert sr_total_pulls(2, targets) == 98


def test_sr_schedule_nondecreasing_and_feasible():
    rng = np.random.default_rng(2)
    for _ in range(200):
        k = int(rng.integers(2, 50))
        budget = int(rng.integers(k + 1, 50 * k))
        try:
            targets = sr_schedule(k, budget)
        except ConfigError:
            continue
        assert np.all(np.diff(targets) >= 0)
        assert sr_total_pulls(k, targets) <= budget


def test_sr_schedule_too_small():
    with pytest.raises(ConfigError):
        sr_schedule(3, 3)


def test_sr_run_noiseless():
    env = ZeroNoiseEnvironment(np.array([1.0, 0.5, 0.0]))
    assert run_to_end(SRSampler(30), env, 3, 30) == 0


def test_sr_elimination_tie_breaks_largest_index():
    sampler = SRSampler(30)
    env = ZeroNoiseEnvironment(np.array([1.0, 0.0, 0.0]))
    state = EmpiricalState.empty(3)
    sampler.bind(3, np.random.default_rng(0))
    # run phase 1 manually
    while True:
        seg = sampler.next_segment(state)
        arm, n = seg
        r = env.draw(arm, n)
        state.update(arm, n, r)
        sampler.observe(arm, n, r)
        if len(sampler._plan) == 0:
            break
    sampler.next_segment(state)  # triggers elimination of arm 2 (largest tied index)
    assert sampler.survivors == [0, 1]


def test_sr_pull_accounting():
    k, budget = 5, 200
    sampler = SRSampler(budget)
    env = GaussianEnvironment(np.zeros(k) + [1, 0.8, 0.6, 0.4, 0.0], np.random.default_rng(1))
    state = EmpiricalState.empty(k)
    sampler.bind(k, np.random.default_rng(0))
    while (seg := sampler.next_segment(state)) is not None:
        arm, n = seg
        r = env.draw(arm, n)
        state.update(arm, n, r)
        sampler.observe(arm, n, r)
    assert state.t == sr_total_pulls(k, sampler.pull_targets)
    assert state.t <= budget


# --- sh ------------------------------------------------------------------------

def test_sh_round_budgets_k4():
    sampler = SHSampler(80)
    env = ZeroNoiseEnvironment(np.array([1.0, 0.9, 0.8, 0.7]))
    state = EmpiricalState.empty(4)
    sampler.bind(4, np.random.default_rng(0))
    segments = []
    while (seg := sampler.next_segment(state)) is not None:
        arm, n = seg
        r = env.draw(arm, n)
        state.update(arm, n, r)
        sampler.observe(arm, n, r)
        segments.append((arm, n))
    # round 1: 4 arms x 10 pulls; round 2: 2 arms x 20 pulls
    assert [n for _, n in segments] == [10, 10, 10, 10, 20, 20]
    assert sampler.rounds == 2
    assert sampler.recommend(state) == 0


def test_sh_noiseless_survivors():
    env = ZeroNoiseEnvironment(np.array([1.0, 0.9, 0.8, 0.7]))
    assert run_to_end(SHSampler(80), env, 4, 80) == 0


def test_sh_budget_guard():
    with pytest.raises(ConfigError):
        SHSampler(5).bind(4, np.random.default_rng(0))


def test_sh_fallback_before_first_round():
    sampler = SHSampler(80)
    sampler.bind(4, np.random.default_rng(0))
    assert sampler.recommend(EmpiricalState.empty(4)) == 0


# --- doubling wrappers ----------------------------------------------------------

def test_doubling_epoch_boundaries():
    k = 2
    env = ZeroNoiseEnvironment(np.array([1.0, 0.0]))
    sampler = DoublingSampler("sh", initial_budget=8)
    recs = drive(sampler, env, k, [7, 8, 9, 24], np.random.Generator(np.random.Philox(0)))
    assert recs[0] == 0  # fallback before epoch 1 completes (flagged arm 0)
    assert recs[1] == 0  # epoch-1 output
    assert recs[3] == 0  # epoch-2 output at t = 8 + 16


def test_dsr_pads_epochs_to_geometric_budget():
    k = 2
    env = ZeroNoiseEnvironment(np.array([1.0, 0.0]))
    sampler = DoublingSampler("sr", initial_budget=4)
    state = EmpiricalState.empty(k)
    sampler.bind(k, np.random.Generator(np.random.Philox(0)))
    seen = 0
    while seen < 4:
        arm, n = sampler.next_segment(state)
        n = min(n, 4 - seen)
        r = env.draw(arm, n)
        state.update(arm, n, r)
        sampler.observe(arm, n, r)
        seen += n
    # SR(T=4, K=2) consumes 2 pulls; padding brings epoch 1 to exactly 4,
    # after which the next epoch (budget 8) is already armed
    assert state.t == 4
    assert sampler.last_winner == 0
    assert sampler.epoch_budget == 8
    assert sampler.epoch_left == 8


def test_doubling_recommend_mid_epoch_is_previous_winner():
    env = ZeroNoiseEnvironment(np.array([0.0, 1.0]))
    sampler = DoublingSampler("sh", initial_budget=8)
    recs = drive(sampler, env, 2, [8, 12], np.random.Generator(np.random.Philox(0)))
    assert recs[0] == 1 and recs[1] == 1


def test_doubling_requires_sr_or_sh():
    with pytest.raises(ConfigError):
        DoublingSampler("uniform")


# --- pooled allocation ----------------------------------------------------------

def test_pooled_run_noiseless():
    k, batches = 2, 4
    budget = batches * 2 * k * 2  # batch size 8 >= 2K
    sampler = PooledSampler(budget, batches)
    env = ZeroNoiseEnvironment(np.array([1.0, 0.0]))
    rec = run_to_end(sampler, env, k, budget)
    assert rec == 0
    assert sampler.victories.sum() == batches - k  # one victory per scored batch
    assert sampler.victories[0] == batches - k


def test_pooled_rejects_too_few_batches():
    sampler = PooledSampler(100, 2)
    with pytest.raises(ConfigError):
        sampler.bind(2, np.random.default_rng(0))


# --- uniform / recommendation rules ----------------------------------------------

def test_uniform_round_robin():
    sampler = UniformSampler()
    env = ZeroNoiseEnvironment(np.array([0.2, 0.9, 0.9]))
    state = EmpiricalState.empty(3)
    sampler.bind(3, np.random.default_rng(0))
    order = []
    for _ in range(7):
        arm, n = sampler.next_segment(state)
        order.append(arm)
        r = env.draw(arm, n)
        state.update(arm, n, r)
        sampler.observe(arm, n, r)
    assert order == [0, 1, 2, 0, 1, 2, 0]
    assert empirical_best(state) == 1  # tie 0.9 vs 0.9 -> smaller index


def test_anytime_configs_reject_budget():
    for kind in ("simple-tracking", "almost-tracking", "uniform", "dsr", "dsh"):
        with pytest.raises(ConfigError):
            AlgorithmConfig(kind=kind, budget=100)
        AlgorithmConfig(kind=kind)  # fine without a budget


def test_build_sampler_kinds():
    for kind in ALGORITHM_KINDS:
        cfg = AlgorithmConfig(kind=kind)
        sampler = build_sampler(cfg, k=4, horizon=400)
        assert sampler.kind == kind
        sampler.bind(4, np.random.default_rng(0))


def test_identical_seeds_identical_runs():
    means = np.array([1.0, 0.8, 0.8, 0.0])
    for kind in ALGORITHM_KINDS:
        pulls = []
        for _ in range(2):
            sampler = build_sampler(AlgorithmConfig(kind=kind), k=4, horizon=200)
            env = GaussianEnvironment(means, np.random.Generator(np.random.Philox(9)))
            state = EmpiricalState.empty(4)
            sampler.bind(4, np.random.Generator(np.random.Philox(5)))
            sequence = []
            t = 0
            while t < 200 and (seg := sampler.next_segment(state)) is not None:
                arm, n = seg
                n = min(n, 200 - t)
                r = env.draw(arm, n)
                state.update(arm, n, r)
                sampler.observe(arm, n, r)
                sequence.append((arm, n))
                t += n
            pulls.append((sequence, sampler.recommend(state)))
        assert pulls[0] == pulls[1]


def test_run_wrappers():
    from baibench.algorithms import pooled_allocation_run, sh_run, sr_run

    env = ZeroNoiseEnvironment(np.array([1.0, 0.5, 0.0]))
    assert sr_run(env, 3, 30) == 0
    assert sh_run(env, 3, 30) == 0
    env2 = ZeroNoiseEnvironment(np.array([1.0, 0.0]))
    assert pooled_allocation_run(16, 4, env2, 2) == 0
    # a custom scoring rule flips the victories
    assert pooled_allocation_run(16, 4, env2, 2, recommend_fn=lambda q: int(np.argmin(q))) == 1
