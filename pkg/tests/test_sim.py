import csv
import io
import json

import numpy as np
import pytest

from becturbo.codec import ERASED, Codeword, TurboCode
from becturbo.density import DegreeProfile, TurboEnsemble
from becturbo.erasure import PuncturePattern, analyze, extrinsic_probability, punctured_extrinsic_probability
from becturbo.peg import graph_to_interleaver, peg_build
from becturbo.sim import (
    CSV_FIELDS,
    StopRule,
    bec_transmit,
    fer_crossing,
    results_csv,
    results_json,
    run_fer,
    trial_rng,
    validate_pext_oracle,
    wilson_interval,
)
from becturbo.trellis import RscSpec


@pytest.fixture(scope="module")
def small_code():
    K = 200
    prof = DegreeProfile.regular(2)
    ens = TurboEnsemble(RscSpec.parse("1,5/7"), prof, PuncturePattern((1,)), K)
    return TurboCode(ens, graph_to_interleaver(peg_build(K, prof)))


def _cw(n):
    rng = np.random.default_rng(0)
    return Codeword(rng.integers(0, 2, n).astype(np.int8), rng.integers(0, 2, n).astype(np.int8))


def test_transmit_extremes():
    cw = _cw(100)
    rx = bec_transmit(cw, 0.0, np.random.default_rng(1))
    assert np.array_equal(rx.systematic, cw.systematic) and np.array_equal(rx.parity, cw.parity)
    rx = bec_transmit(cw, 1.0, np.random.default_rng(1))
    assert np.all(rx.systematic == ERASED) and np.all(rx.parity == ERASED)
    with pytest.raises(ValueError):
        bec_transmit(cw, 1.5, np.random.default_rng(1))


def test_transmit_statistics():
    n = 50_000
    cw = _cw(n)
    rx = bec_transmit(cw, 0.3, np.random.default_rng(2))
    erased = np.concatenate([rx.systematic, rx.parity]) == ERASED
    sigma = np.sqrt(0.3 * 0.7 / (2 * n))
    assert abs(erased.mean() - 0.3) < 3 * sigma
    kept = rx.systematic != ERASED
    assert np.array_equal(rx.systematic[kept], cw.systematic[kept])


def test_wilson_interval():
    # 0 of 10 at 95%: upper = z^2 / (n + z^2)
    z2 = 1.959963984540054**2
    lo, hi = wilson_interval(0, 10)
    assert lo == pytest.approx(0, abs=1e-12) and hi == pytest.approx(z2 / (10 + z2), rel=1e-9)
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and lo + hi == pytest.approx(1)


def test_trial_streams_independent():
    a = trial_rng(1, 0, 0).random(4)
    assert np.array_equal(a, trial_rng(1, 0, 0).random(4))
    assert not np.array_equal(a, trial_rng(1, 0, 1).random(4))
    assert not np.array_equal(a, trial_rng(1, 1, 0).random(4))


def test_run_fer_zero_erasure(small_code):
    (r,) = run_fer(small_code, [0.0], seed=3, stop=StopRule(max_trials=30))
    assert r.trials == 30 and r.frame_errors == 0 and r.fer == 0 and r.ber == 0
    assert r.gap == pytest.approx(2 / 3)


def test_run_fer_deterministic_and_sound(small_code):
    stop = StopRule(max_trials=200, target_frame_errors=20)
    a = run_fer(small_code, [0.55, 0.7], seed=9, stop=stop)
    b = run_fer(small_code, [0.55, 0.7], seed=9, stop=stop)
    for x, y in zip(a, b):
        assert (x.trials, x.frame_errors, x.bit_errors) == (y.trials, y.frame_errors, y.bit_errors)
    assert all(r.wrong_bits == 0 for r in a)
    assert a[0].fer <= a[1].fer
    assert a[1].frame_errors == 20 and a[1].fer_lo <= a[1].fer <= a[1].fer_hi


def test_outputs(small_code):
    res = run_fer(small_code, [0.5], seed=1, stop=StopRule(max_trials=10))
    text = results_csv(res)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert text.splitlines()[0] == "p0,trials,frame_errors,fer,fer_lo,fer_hi,ber,mean_iters"
    assert tuple(rows[0]) == CSV_FIELDS and int(rows[0]["trials"]) == 10
    doc = json.loads(results_json(res, {"seed": 1}))
    assert doc["config"]["seed"] == 1 and doc["results"][0]["trials"] == 10


def test_fer_crossing():
    class R:
        def __init__(self, p0, fer):
            self.p0, self.fer = p0, fer

    assert fer_crossing([R(0.6, 0.0), R(0.62, 0.2), R(0.64, 0.8)]) == pytest.approx(0.63)
    assert fer_crossing([R(0.6, 0.0), R(0.62, 0.1)]) is None


@pytest.fixture(scope="module")
def a57():
    return analyze("1,5/7")


def test_oracle_zero_erasure(a57):
    est = validate_pext_oracle(a57, 0.0, 0.4, [1, 0], steps=20_000)
    assert est.mean == 0.0 and est.stderr == 0.0


def test_oracle_requires_steps(a57):
    with pytest.raises(ValueError):
        validate_pext_oracle(a57, 0.3, 0.3, steps=100)


@pytest.mark.parametrize("p, q, X", [(0.5, 0.5, None), (0.4, 0.4, (1, 0)), (0.35, 0.5, (1, 0, 1, 0, 0, 0))])
def test_oracle_matches_analysis(a57, p, q, X):
    est = validate_pext_oracle(a57, p, q, X, steps=300_000, seed=5)
    assert est.brackets(punctured_extrinsic_probability(a57, p, q, X))


def test_oracle_other_constituent():
    a = analyze("1,15/13")
    est = validate_pext_oracle(a, 0.4, 0.4, steps=300_000, seed=6)
    assert est.brackets(extrinsic_probability(a, 0.4, 0.4))
