"""Replication driver, PoE curves, confidence intervals, rates."""

import math

import numpy as np
import pytest

from baibench.algorithms import AlgorithmConfig, ConfigError
from baibench.model import Instance
from baibench.simulation import (
    ExperimentConfig,
    GaussianEnvironment,
    ZeroNoiseEnvironment,
    clopper_pearson,
    default_checkpoints,
    estimate_poe,
    estimate_rate,
    minimax_rate,
    rate_bounds,
    replication_rngs,
    run_replication,
)

TWO_ARM = Instance(means=[1.0, 0.0], label="two-arm")


def config(**kwargs):
    defaults = dict(
        instance=TWO_ARM,
        algorithms={"uniform": AlgorithmConfig(kind="uniform")},
        budget=200,
        replications=50,
        seed=7,
    )
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


# --- checkpoints ---------------------------------------------------------------

def test_default_checkpoints_k40():
    cps = default_checkpoints(40, 2000)
    assert len(cps) == 51
    assert cps[0] == 40
    assert cps[-1] == 2000
    assert cps == sorted(set(cps))


def test_default_checkpoints_dedupes_tiny_ranges():
    cps = default_checkpoints(2, 20)
    assert cps[-1] == 20
    assert cps == sorted(set(cps))


def test_explicit_checkpoints_validation():
    with pytest.raises(ConfigError):
        config(checkpoints=[50, 40]).validate()
    with pytest.raises(ConfigError):
        config(checkpoints=[100, 300]).validate()


# --- replication determinism ----------------------------------------------------

def test_run_replication_deterministic():
    cfg = config(checkpoints=[10, 50, 200])
    a = run_replication(cfg, "uniform", 3)
    b = run_replication(cfg, "uniform", 3)
    np.testing.assert_array_equal(a, b)


def test_distinct_replications_distinct_streams():
    cfg = config(checkpoints=[10, 50, 200])
    rng_a, _ = replication_rngs(7, "two-arm", "uniform", 0)
    rng_b, _ = replication_rngs(7, "two-arm", "uniform", 1)
    assert rng_a.standard_normal() != rng_b.standard_normal()


def test_streams_keyed_by_instance_and_algorithm():
    base = replication_rngs(7, "i", "a", 0)[0].standard_normal()
    assert replication_rngs(7, "j", "a", 0)[0].standard_normal() != base
    assert replication_rngs(7, "i", "b", 0)[0].standard_normal() != base
    assert replication_rngs(8, "i", "a", 0)[0].standard_normal() != base


def test_zero_noise_environment_is_exact():
    env = ZeroNoiseEnvironment(np.array([0.5, -0.25]))
    assert env.draw(0, 4) == pytest.approx(2.0)
    assert env.draw(1, 2) == pytest.approx(-0.5)


def test_gaussian_environment_consumes_stream_in_pull_order():
    rng = np.random.Generator(np.random.Philox(3))
    env = GaussianEnvironment(np.zeros(2), rng, block=8)
    reference = np.random.Generator(np.random.Philox(3)).standard_normal(13)
    total = env.draw(0, 5) + env.draw(1, 3) + env.draw(0, 5)
    assert total == pytest.approx(reference.sum())


# --- estimate_poe ----------------------------------------------------------------

def test_uniform_two_arm_closed_form():
    # PoE(T=200) = Phi(-sqrt(50)) ~ 7.7e-13: zero errors expected in 1000 runs.
    cfg = config(replications=1000, checkpoints=[200])
    curve = estimate_poe(cfg)["uniform"]
    assert curve.errors[-1] == 0
    assert curve.poe[-1] == 0.0
    assert curve.ci_high[-1] == pytest.approx(1.0 - 0.025 ** (1.0 / 1000), abs=1e-9)


def test_estimate_poe_worker_count_invariance():
    cfg = config(replications=40, checkpoints=[20, 200])
    serial = estimate_poe(cfg, workers=1)["uniform"]
    parallel = estimate_poe(cfg, workers=4)["uniform"]
    np.testing.assert_array_equal(serial.errors, parallel.errors)


def test_poe_curve_invariants():
    inst = Instance(means=[0.4, 0.0], label="close")
    cfg = config(
        instance=inst,
        budget=60,
        replications=200,
        algorithms={
            "uniform": AlgorithmConfig(kind="uniform"),
            "track": AlgorithmConfig(kind="simple-tracking"),
        },
        checkpoints=[2, 5, 20, 60],
    )
    for curve in estimate_poe(cfg).values():
        assert np.all(curve.poe == curve.errors / curve.replications)
        assert np.all((0 <= curve.ci_low) & (curve.ci_low <= curve.poe))
        assert np.all((curve.poe <= curve.ci_high) & (curve.ci_high <= 1))


def test_non_discarding_curves_defined_from_k_onwards():
    inst = Instance(means=[1.0, 0.6, 0.0], label="three")
    cfg = config(
        instance=inst,
        budget=50,
        replications=5,
        algorithms={
            "track": AlgorithmConfig(kind="simple-tracking"),
            "at": AlgorithmConfig(kind="almost-tracking"),
            "sr": AlgorithmConfig(kind="sr"),
            "uniform": AlgorithmConfig(kind="uniform"),
        },
        checkpoints=[3, 10, 25, 50],
    )
    curves = estimate_poe(cfg)
    for curve in curves.values():
        assert curve.errors.shape == (4,)  # a defined bit at every checkpoint


# --- confidence intervals ---------------------------------------------------------

def test_clopper_pearson_examples():
    lo, hi = clopper_pearson(np.array([100]), 10000)
    assert 0.008 <= lo[0] <= 0.01 <= hi[0] <= 0.013
    lo, hi = clopper_pearson(np.array([0]), 100)
    assert lo[0] == 0.0
    assert hi[0] == pytest.approx(1.0 - 0.025 ** 0.01, abs=1e-9)
    assert hi[0] == pytest.approx(0.0362, abs=2e-4)
    lo, hi = clopper_pearson(np.array([50]), 50)
    assert hi[0] == 1.0


def test_ci_monotone_coverage_meta_trial():
    # Widening R rarely moves the point outside the narrower interval.
    rng = np.random.default_rng(123)
    p_true = 0.1
    outside = 0
    trials = 400
    for _ in range(trials):
        first = rng.binomial(200, p_true)
        lo, hi = clopper_pearson(np.array([first]), 200)
        extra = rng.binomial(600, p_true)
        point = (first + extra) / 800.0
        if not (lo[0] <= point <= hi[0]):
            outside += 1
    assert outside / trials <= 0.05


# --- rates -----------------------------------------------------------------------

def test_estimate_rate_examples():
    assert estimate_rate(0.01, 87.0, 10000) == pytest.approx(0.04006, abs=1e-5)
    assert estimate_rate(1.0, 87.0, 10000) == 0.0
    assert estimate_rate(0.0, 87.0, 10000) == math.inf


def test_rate_bounds_orientation():
    lower, plugin, upper = rate_bounds(0.005, 0.01, 0.02, 87.0, 10000)
    assert lower < plugin < upper
    assert rate_bounds(0.0, 0.001, 0.002, 87.0, 10000)[2] == math.inf


def test_minimax_rate():
    assert minimax_rate([0.5, 0.9, 0.7]) == 0.5
    assert minimax_rate([math.inf, 0.3]) == 0.3
    assert minimax_rate([0.42]) == 0.42
    assert minimax_rate([math.inf, math.inf]) == math.inf
    with pytest.raises(ValueError):
        minimax_rate([])


# --- config validation -------------------------------------------------------------

def test_validate_rejects_degenerate_instance():
    inst = Instance(means=[1.0, 1.0], label="tied")
    with pytest.raises(Exception):
        config(instance=inst).validate()


def test_validate_rejects_infeasible_fixed_budget():
    inst = Instance(means=[1.0, 0.5, 0.2, 0.0], label="four")
    cfg = config(
        instance=inst,
        budget=5,
        algorithms={"sh": AlgorithmConfig(kind="sh")},
        checkpoints=[5],
    )
    with pytest.raises(ConfigError):
        cfg.validate()
