"""Irregular turbo ensembles on the BEC: rate algebra, puncturing patterns, density evolution."""
from __future__ import annotations

import math
import re
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np
from numba import njit

from .erasure import (
    ErasureAnalysis,
    PuncturePattern,
    _pext_window,
    is_catastrophic,
    punctured_extrinsic_probability,
)
from .trellis import RscSpec

RECOVERED_TOL = 1e-7
GRID_POINTS = 512
MAX_DE_ITERATIONS = 10_000
MAX_PERIOD = 64


class InfeasibleRate(ValueError):
    def __init__(self, message: str, boundary: float):
        super().__init__(message)
        self.boundary = boundary


@dataclass(frozen=True)
class DegreeProfile:
    """Node-perspective fractions ``f_d`` of information bits repeated ``d`` times."""

    fractions: Mapping[int, float]

    def __post_init__(self):
        fr = {int(d): float(f) for d, f in self.fractions.items()}
        if not fr:
            raise ValueError("empty degree profile")
        if min(fr) < 2:
            raise ValueError(f"degrees must be >= 2 (got {sorted(fr)})")
        if any(f < 0 for f in fr.values()):
            raise ValueError("fractions must be nonnegative")
        if abs(sum(fr.values()) - 1) > 1e-9:
            raise ValueError(f"fractions sum to {sum(fr.values())!r}, not 1")
        object.__setattr__(self, "fractions", dict(sorted(fr.items())))

    @classmethod
    def regular(cls, d: int = 2) -> "DegreeProfile":
        return cls({d: 1.0})

    @classmethod
    def parse(cls, text: str, normalize: bool = False) -> "DegreeProfile":
        """Parse ``"f2=0.801,f4=0.101,..."``; ``normalize`` rescales fractions rounded to a few decimals."""
        fr = {}
        for item in text.replace(" ", "").split(","):
            m = re.fullmatch(r"f?(\d+)=([0-9.eE+-]+)", item)
            if m is None:
                raise ValueError(f"bad profile entry {item!r}; expected e.g. f2=0.8")
            fr[int(m.group(1))] = float(m.group(2))
        if normalize:
            total = sum(fr.values())
            fr = {d: f / total for d, f in fr.items()}
        return cls(fr)

    @property
    def d_max(self) -> int:
        return max(self.fractions)

    @property
    def degrees(self) -> list[int]:
        return [d for d, f in self.fractions.items() if f > 0]

    def edge_distribution(self) -> "EdgeDistribution":
        dbar = average_degree(self)
        return EdgeDistribution({d: d * f / dbar for d, f in self.fractions.items()})

    def counts(self, K: int) -> dict[int, int]:
        """Per-degree bit counts for block length ``K``.

        Counts are ``floor(f_d K)`` plus one for the largest fractional remainders
        until they sum to ``K`` (ties go to the lower degree).
        """
        raw = {d: f * K for d, f in self.fractions.items()}
        counts = {d: int(math.floor(v + 1e-9)) for d, v in raw.items()}
        short = K - sum(counts.values())
        order = sorted(raw, key=lambda d: (-(raw[d] - counts[d]), d))
        for d in order[:short]:
            counts[d] += 1
        return counts

    def __str__(self) -> str:
        return ",".join(f"f{d}={f:.6g}" for d, f in self.fractions.items() if f > 0)


@dataclass(frozen=True)
class EdgeDistribution:
    """Edge-perspective fractions; ``lam(x) = sum_d lam_d x^(d-1)``."""

    lam: Mapping[int, float]

    def __post_init__(self):
        lam = {int(d): float(v) for d, v in self.lam.items()}
        if any(v < 0 for v in lam.values()) or abs(sum(lam.values()) - 1) > 1e-9:
            raise ValueError("edge distribution must be a probability vector")
        object.__setattr__(self, "lam", dict(sorted(lam.items())))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return sum(v * x ** (d - 1) for d, v in self.lam.items())

    def coefficients(self) -> np.ndarray:
        c = np.zeros(max(self.lam) + 1)
        for d, v in self.lam.items():
            c[d] = v
        return c

    def to_profile(self) -> DegreeProfile:
        w = {d: v / d for d, v in self.lam.items()}
        s = sum(w.values())
        return DegreeProfile({d: x / s for d, x in w.items()})


def average_degree(profile: DegreeProfile) -> float:
    return sum(d * f for d, f in profile.fractions.items())


def punctured_rate(rho0: float, phi: float) -> float:
    if not 0 < rho0 < 1:
        raise ValueError(f"mother rate must be in (0, 1), got {rho0}")
    if not 0 <= phi < 1:
        raise ValueError(f"puncturing fraction must be in [0, 1), got {phi}")
    return 1 / (1 + (1 - phi) * (1 / rho0 - 1))


def coding_rate(profile: DegreeProfile | float, rho: float) -> float:
    dbar = profile if isinstance(profile, (int, float)) else average_degree(profile)
    return 1 / (1 + (1 / rho - 1) * dbar)


def puncture_fraction_for_rate(profile: DegreeProfile | float, rho0: float, rate: float) -> float:
    dbar = profile if isinstance(profile, (int, float)) else average_degree(profile)
    phi = 1 - (1 / rate - 1) / (dbar * (1 / rho0 - 1))
    if phi < -1e-12:
        raise InfeasibleRate(
            f"rate {rate} needs negative puncturing with average degree {dbar:.4f}; "
            f"lowest reachable rate is {coding_rate(dbar, rho0):.6f}",
            coding_rate(dbar, rho0),
        )
    if phi >= 1:
        raise InfeasibleRate(f"rate {rate} needs every parity bit punctured", 1.0)
    return max(phi, 0.0)


PHI_TOL = 1e-3


def candidate_periods(phi: float, max_period: int = MAX_PERIOD, phi_tol: float = PHI_TOL) -> list[int]:
    """Periods (ascending) whose best weight realizes ``phi`` within ``phi_tol``.

    ``max_period`` is always appended as the rounding fallback.
    """
    out = []
    for g in range(1, max_period + 1):
        w = round(g * (1 - phi))
        if w >= 1 and abs(w / g - (1 - phi)) <= phi_tol:
            out.append(g)
    if max_period not in out:
        out.append(max_period)
    return out


def default_period(phi: float, max_period: int = MAX_PERIOD) -> int:
    return candidate_periods(phi, max_period)[0]


def _gaps(ones: tuple[int, ...], period: int) -> list[int]:
    return [((ones[(i + 1) % len(ones)] - ones[i] - 1) % period) + 1 for i in range(len(ones))]


def _bits(ones, period: int) -> tuple[int, ...]:
    bits = [0] * period
    for i in ones:
        bits[i] = 1
    return tuple(bits)


def _fallback_candidates(period: int, weight: int, start: tuple[int, ...]):
    if math.comb(period - 1, weight - 1) <= 20_000:
        import itertools

        cands = [(0,) + c for c in itertools.combinations(range(1, period), weight - 1)]
        cands.sort(key=lambda c: (max(_gaps(c, period)), sum(g * g for g in _gaps(c, period)), c))
        yield from cands
        return
    seen = {start}
    for i in range(weight):
        for delta in (1, -1):
            moved = list(start)
            moved[i] = (moved[i] + delta) % period
            c = tuple(sorted(moved))
            if len(set(c)) == weight and c not in seen:
                seen.add(c)
                yield c


def _uniform_ones(period: int, w: int) -> tuple[int, ...]:
    return tuple(sorted(math.ceil(i * period / w) % period for i in range(1, w + 1)))


def uniform_pattern(
    phi: float, period: int | None = None, analysis: ErasureAnalysis | None = None
) -> PuncturePattern:
    """Puncturing pattern spreading the transmitted parities as evenly as possible.

    Transmitted positions are ``ceil(i*period/w)`` for ``i = 1..w`` (rotated so
    the pattern starts with a 1). When ``analysis`` is given and that pattern is
    catastrophic, other patterns of the same weight are tried, most uniform
    first.

    Without an explicit ``period``, short periods (up to ``BLOCK_PERIOD``)
    realizing ``phi`` within ``PHI_TOL`` are tried first. Otherwise, with an
    ``analysis``, the pattern is assembled from the two short non-catastrophic
    patterns whose rates bracket ``1 - phi`` (see :func:`block_pattern`); an
    evenly spread pattern of a long period would locally repeat catastrophic
    short patterns such as ``1,0,0``.
    """
    if not 0 <= phi < 1:
        raise ValueError(f"puncturing fraction must be in [0, 1), got {phi}")
    if period is not None:
        pattern = _even_pattern(phi, period, analysis)
        if pattern is None:
            raise ValueError(f"no non-catastrophic pattern with puncturing fraction {phi} and period {period}")
        return pattern
    periods = candidate_periods(phi)
    for g in periods:
        if analysis is not None and g > BLOCK_PERIOD:
            break
        pattern = _even_pattern(phi, g, analysis)
        if pattern is not None:
            return pattern
    pattern = block_pattern(phi, analysis) if analysis is not None else None
    if pattern is None:
        pattern = _even_pattern(phi, MAX_PERIOD, analysis)
    if pattern is None:
        raise ValueError(f"no non-catastrophic pattern with puncturing fraction {phi}")
    return pattern


def _even_pattern(phi: float, g: int, analysis: ErasureAnalysis | None) -> PuncturePattern | None:
    w = min(max(int(round(g * (1 - phi))), 1), g)
    ones = _uniform_ones(g, w)
    pattern = PuncturePattern(_bits(ones, g))
    if analysis is None or not is_catastrophic(analysis, pattern):
        return pattern
    for cand in _fallback_candidates(g, w, ones):
        pattern = PuncturePattern(_bits(cand, g))
        if not is_catastrophic(analysis, pattern):
            return pattern
    return None


BLOCK_PERIOD = 12
_block_libraries: "weakref.WeakKeyDictionary[ErasureAnalysis, list]" = weakref.WeakKeyDictionary()


def block_library(analysis: ErasureAnalysis) -> list[tuple[Fraction, PuncturePattern]]:
    """Shortest non-catastrophic pattern for every rate ``w/g`` with ``g <= BLOCK_PERIOD``, by rate."""
    if analysis not in _block_libraries:
        lib: dict[Fraction, PuncturePattern] = {}
        for g in range(1, BLOCK_PERIOD + 1):
            for w in range(1, g + 1):
                r = Fraction(w, g)
                if r in lib:
                    continue
                pattern = _even_pattern(1 - w / g, g, analysis)
                if pattern is not None:
                    lib[r] = pattern
        _block_libraries[analysis] = sorted(lib.items())
    return _block_libraries[analysis]


def block_pattern(phi: float, analysis: ErasureAnalysis, max_period: int = MAX_PERIOD) -> PuncturePattern | None:
    """Evenly interleave copies of the two library patterns whose rates bracket ``1 - phi``.

    The counts are chosen to realize ``phi`` as closely as possible within
    ``max_period`` (shorter periods on ties); the first non-catastrophic
    composition wins. ``None`` if ``1 - phi`` is outside the library's range.
    """
    r = 1 - phi
    lib = block_library(analysis)
    lo = [e for e in lib if e[0] <= r]
    hi = [e for e in lib if e[0] >= r]
    if not lo or not hi:
        return None
    P, Q = lo[-1][1], hi[0][1]
    wP, wQ = sum(P.bits), sum(Q.bits)
    combos = []
    for a in range(max_period // P.period + 1):
        for b in range((max_period - a * P.period) // Q.period + 1):
            if a + b:
                G = a * P.period + b * Q.period
                combos.append((round(abs((a * wP + b * wQ) / G - r), 12), G, a, b))
    for _, _, a, b in sorted(combos):
        bits: list[int] = []
        for i in range(a + b):
            # Bresenham spread of the b copies of Q among a + b blocks
            bits += Q.bits if (i + 1) * b // (a + b) > i * b // (a + b) else P.bits
        pattern = PuncturePattern(tuple(bits))
        if not is_catastrophic(analysis, pattern):
            return pattern
    return None


# ---------------------------------------------------------------------------
# density evolution


@njit(cache=True)
def _lam_eval(lam, y):
    acc = 0.0
    yp = 1.0
    for d in range(1, lam.shape[0]):
        acc += lam[d] * yp
        yp *= y
    return acc


@njit(cache=True)
def _de_map(lam, cf, cb, A, B, X, sf, sb, x, p0):
    v, r = _pext_window(cf, cb, A, B, X, x, p0, sf, sb)
    return p0 * _lam_eval(lam, v), r


@njit(cache=True)
def _recovers(lam, cf, cb, A, B, X, sf, sb, p0, grid_points, tol, max_iter):
    """1 if density evolution recovers at ``p0``, 0 if not, -1 on a chain failure."""
    if p0 <= tol:
        return 1
    for i in range(grid_points):
        x = tol + (p0 - tol) * i / (grid_points - 1)
        y, r = _de_map(lam, cf, cb, A, B, X, sf, sb, x, p0)
        if r < 0.0:
            return -1
        if y > x + 1e-15:
            return 0
    x = p0
    for _ in range(max_iter):
        y, r = _de_map(lam, cf, cb, A, B, X, sf, sb, x, p0)
        if r < 0.0:
            return -1
        if y < tol:
            return 1
        if y >= x:
            return 0
        x = y
    return 0


def _lam_coefficients(lam) -> np.ndarray:
    if isinstance(lam, DegreeProfile):
        lam = lam.edge_distribution()
    return lam.coefficients()


def _pattern(X) -> PuncturePattern:
    if X is None:
        return PuncturePattern((1,))
    return X if isinstance(X, PuncturePattern) else PuncturePattern(tuple(X))


def de_step(x: float, p0: float, lam, analysis: ErasureAnalysis, X=None) -> float:
    """One density-evolution iteration ``p0 * lam(P_ext,X(x, p0))``."""
    if not (0 <= x <= 1 and 0 <= p0 <= 1):
        raise ValueError("x and p0 must lie in [0, 1]")
    if isinstance(lam, DegreeProfile):
        lam = lam.edge_distribution()
    return p0 * float(lam(punctured_extrinsic_probability(analysis, x, p0, X)))


def de_trajectory(x0: float, p0: float, lam, analysis: ErasureAnalysis, X=None, iterations: int = 100):
    xs = [x0]
    for _ in range(iterations):
        xs.append(de_step(xs[-1], p0, lam, analysis, X))
    return np.array(xs)


@dataclass(frozen=True)
class ThresholdResult:
    p_th: float
    catastrophic: bool = False
    bisection_width: float = 1e-4

    def __float__(self) -> float:
        return self.p_th


def recovers(p0: float, lam, analysis: ErasureAnalysis, X=None) -> bool:
    """Whether density evolution drives the erasure probability to zero at ``p0``."""
    pattern = _pattern(X)
    cf, cb, A, B = analysis.kernel_args
    status = _recovers(
        _lam_coefficients(lam), cf, cb, A, B, pattern.as_array(), 0, analysis.backward_start,
        float(p0), GRID_POINTS, RECOVERED_TOL, MAX_DE_ITERATIONS,
    )
    if status < 0:
        raise ArithmeticError(f"window chain failed to converge at p0={p0}")
    return bool(status)


def threshold(
    lam, analysis: ErasureAnalysis, X=None, width: float = 1e-4, upper: float = 1.0
) -> ThresholdResult:
    """Largest channel erasure probability from which decoding recovers (bisection)."""
    pattern = _pattern(X)
    if is_catastrophic(analysis, pattern):
        return ThresholdResult(0.0, True, width)
    coeffs = _lam_coefficients(lam)
    cf, cb, A, B = analysis.kernel_args
    xs = pattern.as_array()
    lo, hi = 0.0, upper
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        status = _recovers(
            coeffs, cf, cb, A, B, xs, 0, analysis.backward_start,
            mid, GRID_POINTS, RECOVERED_TOL, MAX_DE_ITERATIONS,
        )
        if status < 0:
            raise ArithmeticError(f"window chain failed to converge at p0={mid}")
        if status:
            lo = mid
        else:
            hi = mid
    return ThresholdResult(lo, False, width)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TurboEnsemble:
    """Finite-length irregular turbo code built from one RSC constituent.

    ``N`` is the number of trellis steps, the sum of the rounded bit degrees;
    ``nominal_N`` is ``round(K * dbar)`` for comparison.
    """

    constituent: RscSpec
    profile: DegreeProfile
    pattern: PuncturePattern
    K: int
    counts: dict = field(init=False, compare=False)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        object.__setattr__(self, "counts", self.profile.counts(self.K))

    @classmethod
    def design(
        cls,
        constituent: RscSpec | str,
        profile: DegreeProfile,
        K: int,
        rate: float | None = None,
        pattern: PuncturePattern | None = None,
        analysis: ErasureAnalysis | None = None,
    ) -> "TurboEnsemble":
        """Choose the puncturing pattern from a target rate (or take ``pattern`` as given)."""
        if isinstance(constituent, str):
            constituent = RscSpec.parse(constituent)
        if pattern is None:
            phi = 0.0 if rate is None else puncture_fraction_for_rate(profile, constituent.rate, rate)
            pattern = uniform_pattern(phi, analysis=analysis)
        return cls(constituent, profile, pattern, K)

    @property
    def degrees(self) -> np.ndarray:
        """Degree of every information bit; bits are grouped by increasing degree."""
        return np.repeat(list(self.counts), list(self.counts.values())).astype(np.int64)

    @property
    def N(self) -> int:
        return sum(d * c for d, c in self.counts.items())

    @property
    def nominal_N(self) -> int:
        return round(self.K * average_degree(self.profile))

    @property
    def average_degree(self) -> float:
        return average_degree(self.profile)

    @property
    def rho0(self) -> float:
        return self.constituent.rate

    @property
    def phi_p(self) -> float:
        return self.pattern.punctured_fraction

    @property
    def rho(self) -> float:
        return punctured_rate(self.rho0, self.phi_p)

    @property
    def rate(self) -> float:
        return coding_rate(self.profile, self.rho)

    @property
    def transmitted_parity(self) -> int:
        return int(self.pattern.tiled(self.N).sum())

    @property
    def finite_rate(self) -> float:
        return self.K / (self.K + self.transmitted_parity)
