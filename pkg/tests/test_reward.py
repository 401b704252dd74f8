import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chipletplan.errors import ConfigurationError
from chipletplan.fast_thermal import evaluate_temperatures
from chipletplan.floorplan_env import reset
from chipletplan.interconnect import wirelength
from chipletplan.reward import RewardConfig, compute_reward, evaluate_floorplan

CFG = RewardConfig(lam=1e-3, mu=0.1, t0=358.15, alpha=2.0)


def test_worked_example(oracles):
    assert compute_reward(1000.0, 360.15, CFG) == pytest.approx(oracles["reward_example"],
                                                                rel=1e-12)
    assert compute_reward(1000.0, 360.15, CFG) == pytest.approx(-1.3524, abs=1e-4)


def test_below_threshold_is_wirelength_only():
    assert compute_reward(250.0, 300.0, CFG) == -0.25
    assert compute_reward(250.0, CFG.t0, CFG) == -0.25


@given(st.floats(0, 1e5), st.floats(0, 1e5), st.floats(250.0, 450.0))
def test_monotone_in_wirelength(w1, w2, t):
    lo, hi = sorted((w1, w2))
    assert compute_reward(hi, t, CFG) <= compute_reward(lo, t, CFG)


@given(st.floats(0, 1e4), st.floats(250.0, 450.0), st.floats(250.0, 450.0))
def test_monotone_in_temperature(w, t1, t2):
    lo, hi = sorted((t1, t2))
    assert compute_reward(w, hi, CFG) <= compute_reward(w, lo, CFG)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_continuous_and_flat_at_threshold(alpha):
    cfg = RewardConfig(lam=1e-3, mu=0.7, t0=358.15, alpha=alpha)
    h = 1e-4
    at = compute_reward(100.0, cfg.t0, cfg)
    above = compute_reward(100.0, cfg.t0 + h, cfg)
    below = compute_reward(100.0, cfg.t0 - h, cfg)
    assert abs(above - at) < 1e-5 and abs(below - at) < 1e-12
    # the right slope is about mu/2 * h^(alpha-1), which vanishes with h
    assert abs((above - at) / h) <= cfg.mu * h ** (alpha - 1)
    assert abs((at - below) / h) < 1e-12


def test_config_validation():
    for kw in (dict(lam=-1.0), dict(mu=-0.1), dict(alpha=1.0), dict(t0=0.0),
               dict(lam=math.nan), dict(failure_reward=math.inf)):
        with pytest.raises(ConfigurationError):
            RewardConfig(**kw)


def test_incomplete_scores_failure(synth_case, default_tables):
    spec, _ = synth_case
    cfg = RewardConfig(failure_reward=-123.0)
    res = evaluate_floorplan(reset(spec), spec, default_tables, cfg)
    assert res.reward == -123.0 and not res.complete


def test_fast_evaluation_needs_tables(synth_case):
    spec, fp = synth_case
    with pytest.raises(ConfigurationError):
        evaluate_floorplan(fp, spec, None)


def test_composition_consistent(synth_case, default_tables):
    spec, fp = synth_case
    cfg = RewardConfig(lam=2e-3, mu=0.3, t0=330.0)
    res = evaluate_floorplan(fp, spec, default_tables, cfg)
    wl = wirelength(fp, spec)
    temp = evaluate_temperatures(fp, spec, default_tables).max_temperature
    assert res.wirelength == wl and res.temperature == temp
    assert res.reward == compute_reward(wl, temp, cfg)
    assert np.isfinite(res.reward)


def test_reference_backend_uses_solver(synth_case, default_tables):
    from chipletplan.thermal_reference import peak_temperature
    spec, fp = synth_case
    res = evaluate_floorplan(fp, spec, default_tables, reference=True)
    assert res.temperature == peak_temperature(fp, spec)
