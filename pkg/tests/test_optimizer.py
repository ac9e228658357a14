import numpy as np
import pytest

from becturbo.density import coding_rate, punctured_rate, threshold
from becturbo.erasure import analyze, is_catastrophic
from becturbo.optimizer import OptimizerConfig, optimize

SMALL = OptimizerConfig(population_size=8, generations=4, seed=3, d_max=6)


@pytest.fixture(scope="module")
def a57():
    return analyze("1,5/7")


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(population_size=3)
    with pytest.raises(ValueError):
        OptimizerConfig(scale_factor=0)
    with pytest.raises(ValueError):
        OptimizerConfig(crossover_rate=1.5)
    with pytest.raises(ValueError):
        OptimizerConfig(d_max=1)
    with pytest.raises(ValueError):
        OptimizerConfig(d_max=6, active_degrees=(2, 7))
    assert OptimizerConfig(d_max=5).degrees == (2, 3, 4, 5)
    assert OptimizerConfig(active_degrees=(8, 2, 2)).degrees == (2, 8)


def test_single_degree_is_regular(a57):
    r = optimize(0.5, "1,5/7", OptimizerConfig(d_max=2), analysis=a57)
    assert r.profile.fractions == {2: 1.0}
    assert str(r.pattern) == "1,0"
    assert r.p_th == pytest.approx(0.4729, abs=5e-4)


def test_single_degree_infeasible(a57):
    # d = 2 unpunctured already has rate 1/3
    with pytest.raises(ValueError):
        optimize(0.25, "1,5/7", OptimizerConfig(d_max=2), analysis=a57)


@pytest.fixture(scope="module")
def small_run(a57):
    seen = []
    r = optimize(0.5, "1,5/7", SMALL, callback=lambda g, c: seen.append(g), analysis=a57)
    return r, seen


def test_deterministic(a57, small_run):
    r, _ = small_run
    again = optimize(0.5, "1,5/7", SMALL, analysis=a57)
    assert again.profile.fractions == r.profile.fractions
    assert again.p_th == r.p_th and str(again.pattern) == str(r.pattern)


def test_history_and_callback(small_run):
    r, seen = small_run
    assert seen == list(range(SMALL.generations + 1))
    trace = [c.p_th for c in r.history]
    assert len(trace) == SMALL.generations + 1
    assert np.all(np.diff(trace) >= 0)


def test_result_consistent(a57, small_run):
    r, _ = small_run
    assert sum(r.profile.fractions.values()) == pytest.approx(1)
    assert max(r.profile.degrees) <= SMALL.d_max
    assert not is_catastrophic(a57, r.pattern)
    assert threshold(r.profile, a57, r.pattern, width=1e-4).p_th == pytest.approx(r.p_th, abs=1e-12)
    R = coding_rate(r.profile, punctured_rate(0.5, r.pattern.punctured_fraction))
    assert abs(R - 0.5) < 0.02
    assert r.p_th <= 1 - R


def test_seed_changes_search(a57, small_run):
    r, _ = small_run
    other = optimize(0.5, "1,5/7", OptimizerConfig(population_size=8, generations=4, seed=4, d_max=6), analysis=a57)
    assert other.profile.fractions != r.profile.fractions
