"""Erasure channel, Monte-Carlo frame error rates and a simulation check of P_ext."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numba import njit
from scipy.stats import binomtest

from .codec import ERASED, Codeword, ReceivedWord, TurboCode
from .erasure import ErasureAnalysis, PuncturePattern

CSV_FIELDS = ("p0", "trials", "frame_errors", "fer", "fer_lo", "fer_hi", "ber", "mean_iters")


def bec_transmit(codeword: Codeword, p0: float, rng: np.random.Generator) -> ReceivedWord:
    """Erase every symbol independently with probability ``p0``."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0={p0} outside [0, 1]")
    sys_mask = rng.random(codeword.systematic.shape[0]) < p0
    par_mask = rng.random(codeword.parity.shape[0]) < p0
    return ReceivedWord(
        np.where(sys_mask, ERASED, codeword.systematic).astype(np.int8),
        np.where(par_mask, ERASED, codeword.parity).astype(np.int8),
    )


@dataclass(frozen=True)
class StopRule:
    max_trials: int = 100_000
    target_frame_errors: int = 100


@dataclass(frozen=True)
class SimResult:
    p0: float
    trials: int
    frame_errors: int
    bit_errors: int
    fer: float
    fer_lo: float
    fer_hi: float
    ber: float
    mean_iters: float
    wall_time: float
    gap: float  # (1 - R_c) - p0
    wrong_bits: int  # decoded bits that differ from the transmitted ones

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def trial_rng(seed: int, p0_index: int, trial: int) -> np.random.Generator:
    """Independent stream per (p0 index, trial), so trials can run in any order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(p0_index, trial)))


def run_fer(
    code: TurboCode,
    p0_list: Iterable[float],
    seed: int = 0,
    stop: StopRule = StopRule(),
    max_iterations: int = 200,
) -> list[SimResult]:
    """Frame and bit erasure rates of ``code`` at each channel erasure probability.

    A frame fails when any information bit is left erased. Random information
    words are drawn per trial.
    """
    results = []
    design_rate = code.ensemble.rate
    for pi, p0 in enumerate(p0_list):
        t0 = time.perf_counter()
        trials = frame_errors = bit_errors = iters = wrong = 0
        while trials < stop.max_trials and frame_errors < stop.target_frame_errors:
            rng = trial_rng(seed, pi, trials)
            info = rng.integers(0, 2, code.K, dtype=np.int8)
            rx = bec_transmit(code.encode(info), p0, rng)
            res = code.decode(rx, max_iterations)
            known = res.decoded != ERASED
            wrong += int(np.count_nonzero(res.decoded[known] != info[known]))
            lost = code.K - int(known.sum())
            trials += 1
            bit_errors += lost
            frame_errors += lost > 0
            iters += res.iterations_used
        lo, hi = wilson_interval(frame_errors, trials)
        results.append(SimResult(
            p0=float(p0), trials=trials, frame_errors=frame_errors, bit_errors=bit_errors,
            fer=frame_errors / trials if trials else 0.0, fer_lo=lo, fer_hi=hi,
            ber=bit_errors / (trials * code.K) if trials else 0.0,
            mean_iters=iters / trials if trials else 0.0,
            wall_time=time.perf_counter() - t0, gap=(1 - design_rate) - float(p0), wrong_bits=wrong,
        ))
    return results


def fer_crossing(results: Sequence[SimResult], level: float = 0.5) -> Optional[float]:
    """First p0 where the FER curve crosses ``level``, by linear interpolation."""
    pts = sorted((r.p0, r.fer) for r in results)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y0 < level <= y1:
            return x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    return None


def results_csv(results: Sequence[SimResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def results_json(results: Sequence[SimResult], config: dict) -> str:
    return json.dumps({"config": config, "results": [asdict(r) for r in results]}, indent=2)


# ---------------------------------------------------------------------------
# forward-backward check of the analytic extrinsic erasure probability


@njit(cache=True)
def _fb_erased(nxt, par, info_erased, parity_erased, out):
    """Real-valued forward-backward on the all-zero codeword; flag erased extrinsic outputs.

    Starts in state 0, ends unterminated (uniform backward vector).
    """
    L = info_erased.shape[0]
    S = nxt.shape[0]
    alpha = np.zeros((L + 1, S))
    beta = np.zeros((L + 1, S))
    alpha[0, 0] = 1.0
    for n in range(L):
        tot = 0.0
        for s in range(S):
            a = alpha[n, s]
            if a == 0.0:
                continue
            for b in range(2):
                if b != 0 and not info_erased[n]:
                    continue
                if par[s, b] != 0 and not parity_erased[n]:
                    continue
                alpha[n + 1, nxt[s, b]] += a
                tot += a
        for s in range(S):
            alpha[n + 1, s] /= tot
    for s in range(S):
        beta[L, s] = 1.0 / S
    for n in range(L - 1, -1, -1):
        tot = 0.0
        for s in range(S):
            for b in range(2):
                if b != 0 and not info_erased[n]:
                    continue
                if par[s, b] != 0 and not parity_erased[n]:
                    continue
                v = beta[n + 1, nxt[s, b]]
                beta[n, s] += v
                tot += v
        for s in range(S):
            beta[n, s] /= tot
    for n in range(L):
        m0 = 0.0
        m1 = 0.0
        for s in range(S):
            for b in range(2):
                if par[s, b] != 0 and not parity_erased[n]:
                    continue
                v = alpha[n, s] * beta[n + 1, nxt[s, b]]
                if b == 0:
                    m0 += v
                else:
                    m1 += v
        out[n] = abs(m0 - m1) <= 1e-9 * (m0 + m1)


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    stderr: float
    positions: int

    def brackets(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr


def validate_pext_oracle(
    analysis: ErasureAnalysis,
    p: float,
    q: float,
    X: PuncturePattern | Sequence[int] | None = None,
    steps: int = 1_000_000,
    seed: int = 0,
    chains: int = 500,
    burn_in: int = 300,
) -> OracleEstimate:
    """Monte-Carlo estimate of the extrinsic erasure probability with its standard error.

    ``steps`` counted positions are split over independent trellis sections;
    ``burn_in`` positions are run and discarded at both ends of each section so
    boundary effects vanish, and every section starts at pattern phase 0 with a
    whole number of periods counted. The standard error comes from the spread
    of the per-section means.
    """
    if steps < 10_000:
        raise ValueError("need at least 10^4 steps")
    X = PuncturePattern.unpunctured(1) if X is None else X
    X = X if isinstance(X, PuncturePattern) else PuncturePattern(tuple(int(v) for v in X))
    period = X.period
    per_chain = max(period, (steps // chains) // period * period)
    lead = -(-burn_in // period) * period
    L = lead + per_chain + burn_in
    xs = X.tiled(L).astype(bool)
    t = analysis.trellis
    rng = np.random.default_rng(seed)
    out = np.empty(L, np.bool_)
    means = np.empty(chains)
    for c in range(chains):
        info_erased = rng.random(L) < p
        parity_erased = (rng.random(L) < q) | ~xs
        _fb_erased(t.next_state, t.parity, info_erased, parity_erased, out)
        means[c] = out[lead: lead + per_chain].mean()
    stderr = means.std(ddof=1) / np.sqrt(chains)
    return OracleEstimate(float(means.mean()), float(stderr), chains * per_chain)
