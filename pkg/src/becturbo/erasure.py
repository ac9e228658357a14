"""Exact extrinsic erasure probability of (punctured) RSC codes on the BEC.

Under the all-zero codeword, every forward/backward BCJR state distribution is
uniform over a subset of states containing state 0. Such subsets are stored as
integer bitmasks (bit ``s`` set means state ``s`` is in the support). The finite
set of reachable masks forms a Markov chain whose transition probabilities are
bilinear in the information erasure probability ``p`` and the parity erasure
probability ``q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .trellis import RscSpec, Trellis, build_trellis

FORWARD = "forward"
BACKWARD = "backward"

# coefficient 4-tuples (1, p, q, pq) of the four per-step channel outcomes,
# keyed by (info_erased, parity_erased)
OUTCOME_COEFFS = {
    (False, False): (1, -1, -1, 1),
    (True, False): (0, 1, 0, -1),
    (False, True): (0, 0, 1, -1),
    (True, True): (0, 0, 0, 1),
}

STATIONARY_TOL = 1e-12
MAX_SQUARINGS = 64
CATASTROPHIC_EPS = 1e-9
# q = 1 is excluded: with no parity observed the extrinsic output is always
# erased, for every pattern including the unpunctured one
CATASTROPHIC_QS = (0.25, 0.5, 0.75)


class StationaryError(RuntimeError):
    """Power iteration did not settle on a stationary distribution."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def mask_states(mask: int) -> list[int]:
    return [s for s in range(mask.bit_length()) if (mask >> s) & 1]


def mask_distribution(mask: int, num_states: int) -> np.ndarray:
    """Uniform distribution over the support encoded by ``mask``."""
    v = np.array([(mask >> s) & 1 for s in range(num_states)], dtype=float)
    return v / v.sum()


def _step(mask: int, trellis: Trellis, info_erased: bool, parity_erased: bool, forward: bool) -> int:
    out = 0
    for e in trellis.edges:
        if (e.b and not info_erased) or (e.c and not parity_erased):
            continue
        if forward and (mask >> e.l) & 1:
            out |= 1 << e.r
        elif not forward and (mask >> e.r) & 1:
            out |= 1 << e.l
    if out == 0:
        raise RuntimeError(f"empty state support from mask {mask:#b}; trellis lost the all-zero path")
    return out


def forward_step(mask: int, trellis: Trellis, info_erased: bool, parity_erased: bool) -> int:
    """Support of the next forward distribution after one trellis step."""
    return _step(mask, trellis, info_erased, parity_erased, forward=True)


def backward_step(mask: int, trellis: Trellis, info_erased: bool, parity_erased: bool) -> int:
    return _step(mask, trellis, info_erased, parity_erased, forward=False)


def alphabet_bound(memory: int) -> int:
    """Upper bound on the number of state distributions under the all-zero codeword."""
    S = 1 << memory
    return sum(comb(S - 1, (1 << a) - 1) for a in range(memory + 1))


@dataclass(frozen=True)
class DistributionAlphabet:
    direction: str
    num_states: int
    members: tuple[int, ...]
    index_of: dict = field(compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.members)

    def distributions(self) -> np.ndarray:
        return np.array([mask_distribution(m, self.num_states) for m in self.members])

    @property
    def full_index(self) -> int:
        return self.index_of[(1 << self.num_states) - 1]


def enumerate_alphabet(trellis: Trellis, direction: str) -> DistributionAlphabet:
    """Closure of ``{0}`` under the four (info, parity) erasure outcomes."""
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")
    fwd = direction == FORWARD
    seen = {1}
    todo = [1]
    while todo:
        m = todo.pop()
        for ie, pe in OUTCOME_COEFFS:
            nm = _step(m, trellis, ie, pe, fwd)
            if nm not in seen:
                seen.add(nm)
                todo.append(nm)
    bound = alphabet_bound(trellis.spec.memory)
    if len(seen) > bound:
        raise RuntimeError(f"alphabet has {len(seen)} members, above the bound {bound}")
    members = (1,) + tuple(sorted(seen - {1}, key=lambda m: (bin(m).count("1"), m)))
    return DistributionAlphabet(
        direction, trellis.num_states, members, {m: i for i, m in enumerate(members)}
    )


@dataclass(frozen=True, eq=False)
class BilinearMatrix:
    """Square matrix whose entries are ``c1 + cp*p + cq*q + cpq*p*q``.

    ``coef`` has shape ``(n, n, 4)`` with integer coefficients.
    """

    coef: np.ndarray

    @property
    def dim(self) -> int:
        return self.coef.shape[0]

    def __call__(self, p, q) -> np.ndarray:
        p = np.asarray(p, dtype=float)[..., None, None]
        q = np.asarray(q, dtype=float)[..., None, None]
        c = self.coef
        return c[..., 0] + c[..., 1] * p + c[..., 2] * q + c[..., 3] * p * q

    def entry_str(self, i: int, j: int) -> str:
        return poly_str(self.coef[i, j])

    def __str__(self) -> str:
        rows = [[self.entry_str(i, j) for j in range(self.dim)] for i in range(self.dim)]
        width = max(len(x) for r in rows for x in r)
        return "\n".join("  ".join(x.rjust(width) for x in r) for r in rows)


def poly_str(c: Sequence[int]) -> str:
    terms = []
    for coeff, mono in zip(c, ("", "p", "q", "pq")):
        if coeff == 0:
            continue
        mag = abs(coeff)
        body = mono if mono and mag == 1 else f"{mag}{mono}"
        terms.append(("-" if coeff < 0 else "+") + body)
    if not terms:
        return "0"
    s = " ".join(t[0] + " " + t[1:] for t in terms)
    return s[2:] if s.startswith("+") else "-" + s[2:]


def build_transition_matrix(trellis: Trellis, alphabet: DistributionAlphabet) -> BilinearMatrix:
    n = len(alphabet)
    fwd = alphabet.direction == FORWARD
    coef = np.zeros((n, n, 4), dtype=np.int64)
    for i, m in enumerate(alphabet.members):
        for (ie, pe), c in OUTCOME_COEFFS.items():
            j = alphabet.index_of[_step(m, trellis, ie, pe, fwd)]
            coef[i, j] += c
    coef.setflags(write=False)
    return BilinearMatrix(coef)


@dataclass(frozen=True, eq=False)
class ErasureIndicator:
    """``T(q) = q*A + (1-q)*B``; ``A`` for an erased parity, ``B`` for a received one."""

    A: np.ndarray
    B: np.ndarray

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)[..., None, None]
        return q * self.A + (1 - q) * self.B

    def entry_str(self, i: int, j: int) -> str:
        return poly_str((int(self.B[i, j]), 0, int(self.A[i, j] - self.B[i, j]), 0))


def _ambiguous(trellis: Trellis, fmask: int, bmask: int, parity_erased: bool) -> bool:
    bits = set()
    for e in trellis.edges:
        if (fmask >> e.l) & 1 and (bmask >> e.r) & 1 and (parity_erased or e.c == 0):
            bits.add(e.b)
    return len(bits) == 2


def build_erasure_indicator(
    trellis: Trellis, fwd: DistributionAlphabet, bwd: DistributionAlphabet
) -> ErasureIndicator:
    A = np.zeros((len(fwd), len(bwd)), dtype=np.int64)
    B = np.zeros_like(A)
    for i, fm in enumerate(fwd.members):
        for j, bm in enumerate(bwd.members):
            A[i, j] = _ambiguous(trellis, fm, bm, True)
            B[i, j] = _ambiguous(trellis, fm, bm, False)
    A.setflags(write=False)
    B.setflags(write=False)
    return ErasureIndicator(A, B)


@dataclass(frozen=True)
class PuncturePattern:
    """Periodic parity puncturing; ``bits[g] == 0`` punctures window position ``g``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) == 0:
            raise ValueError("puncturing pattern must have period >= 1")
        if any(x not in (0, 1) for x in self.bits):
            raise ValueError(f"pattern entries must be 0 or 1: {self.bits}")
        if not any(self.bits):
            raise ValueError("pattern punctures every parity bit")
        object.__setattr__(self, "bits", tuple(int(x) for x in self.bits))

    @classmethod
    def parse(cls, text: str) -> "PuncturePattern":
        return cls(tuple(int(t) for t in text.replace(" ", "").split(",") if t))

    @classmethod
    def unpunctured(cls, period: int = 1) -> "PuncturePattern":
        return cls((1,) * period)

    @property
    def period(self) -> int:
        return len(self.bits)

    @property
    def punctured_fraction(self) -> float:
        return 1 - sum(self.bits) / len(self.bits)

    def tiled(self, length: int) -> np.ndarray:
        reps = -(-length // self.period)
        return np.tile(np.array(self.bits, dtype=np.int8), reps)[:length]

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int64)

    def __str__(self) -> str:
        return ",".join(map(str, self.bits))


# ---------------------------------------------------------------------------
# numeric kernels


@njit(cache=True)
def _eval_bilinear(coef, p, q):
    n, m = coef.shape[0], coef.shape[1]
    out = np.empty((n, m))
    pq = p * q
    for i in range(n):
        for j in range(m):
            out[i, j] = coef[i, j, 0] + coef[i, j, 1] * p + coef[i, j, 2] * q + coef[i, j, 3] * pq
    return out


@njit(cache=True)
def _matmul(a, b):
    n, k, m = a.shape[0], a.shape[1], b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for t in range(k):
            x = a[i, t]
            if x != 0.0:
                for j in range(m):
                    out[i, j] += x * b[t, j]
    return out


@njit(cache=True)
def _vecmat(v, a):
    n, m = a.shape
    out = np.zeros(m)
    for i in range(n):
        x = v[i]
        if x != 0.0:
            for j in range(m):
                out[j] += x * a[i, j]
    return out


@njit(cache=True)
def _stationary(M, start, tol, max_squarings):
    """Return ``(pi, residual, converged)`` with ``pi = start @ M^(2^k)``."""
    n = M.shape[0]
    P = M.copy()
    v = _vecmat(start, P)
    converged = False
    for _ in range(max_squarings):
        P = _matmul(P, P)
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += P[i, j]
            for j in range(n):
                P[i, j] /= s
        w = _vecmat(start, P)
        diff = 0.0
        for j in range(n):
            d = abs(w[j] - v[j])
            if d > diff:
                diff = d
        v = w
        if diff < tol:
            converged = True
            break
    s = v.sum()
    v = v / s
    vm = _vecmat(v, M)
    res = 0.0
    for j in range(n):
        d = abs(vm[j] - v[j])
        if d > res:
            res = d
    return v, res, converged


@njit(cache=True)
def _pext_window(cf, cb, A, B, X, p, q, sf, sb):
    """Average per-position extrinsic erasure probability over one window.

    Returns ``(value, residual)``; ``residual`` is negative when a window chain
    failed to converge.
    """
    nf, nb = cf.shape[0], cb.shape[0]
    G = X.shape[0]
    Fq = _eval_bilinear(cf, p, q)
    F1 = _eval_bilinear(cf, p, 1.0)
    Bq = _eval_bilinear(cb, p, q)
    B1 = _eval_bilinear(cb, p, 1.0)

    MF = Fq.copy() if X[0] else F1.copy()
    for g in range(1, G):
        MF = _matmul(MF, Fq if X[g] else F1)
    MB = Bq.copy() if X[G - 1] else B1.copy()
    for g in range(G - 2, -1, -1):
        MB = _matmul(MB, Bq if X[g] else B1)

    e = np.zeros(nf)
    e[sf] = 1.0
    piF, resF, okF = _stationary(MF, e, 1e-12, 64)
    e = np.zeros(nb)
    e[sb] = 1.0
    piB, resB, okB = _stationary(MB, e, 1e-12, 64)
    res = max(resF, resB)
    if not (okF and okB) or res > 1e-9:
        return np.nan, -max(res, 1e-300)

    fwd = np.empty((G, nf))
    fwd[0] = piF
    for g in range(1, G):
        fwd[g] = _vecmat(fwd[g - 1], Fq if X[g - 1] else F1)
    bwd = np.empty((G, nb))
    bwd[G - 1] = piB
    for g in range(G - 2, -1, -1):
        bwd[g] = _vecmat(bwd[g + 1], Bq if X[g + 1] else B1)

    total = 0.0
    for g in range(G):
        qq = q if X[g] else 1.0
        acc = 0.0
        for i in range(nf):
            fi = fwd[g, i]
            if fi == 0.0:
                continue
            for j in range(nb):
                t = qq * A[i, j] + (1.0 - qq) * B[i, j]
                acc += fi * t * bwd[g, j]
        total += acc
    val = total / G
    if val < 0.0:
        val = 0.0
    elif val > 1.0:
        val = 1.0
    return val, res


@njit(cache=True)
def _pext_many(cf, cb, A, B, X, ps, qs, sf, sb):
    out = np.empty(ps.shape[0])
    worst = 0.0
    for i in range(ps.shape[0]):
        v, r = _pext_window(cf, cb, A, B, X, ps[i], qs[i], sf, sb)
        out[i] = v
        if r < 0.0:
            return out, r
        worst = max(worst, r)
    return out, worst


# ---------------------------------------------------------------------------


def stationary(matrix: np.ndarray, start=None, tol: float = STATIONARY_TOL) -> np.ndarray:
    """Stationary row vector of a stochastic matrix by power iteration.

    The iteration doubles its horizon each round (``start @ M^(2^k)``), so a
    chain with mixing time ``t`` needs about ``log2(t)`` rounds. ``start``
    defaults to the uniform vector.
    """
    M = np.asarray(matrix, dtype=float)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise ValueError("matrix must be square")
    if np.any(M < -1e-12) or np.max(np.abs(M.sum(axis=1) - 1)) > 1e-12:
        raise ValueError("matrix is not row-stochastic")
    if start is None:
        start = np.full(n, 1.0 / n)
    elif np.isscalar(start):
        e = np.zeros(n)
        e[int(start)] = 1.0
        start = e
    pi, res, ok = _stationary(M, np.asarray(start, dtype=float), tol, MAX_SQUARINGS)
    if not ok or res > 1e-9:
        raise StationaryError("power iteration did not converge", res)
    return pi


@dataclass(frozen=True, eq=False)
class ErasureAnalysis:
    """Everything needed to evaluate extrinsic erasure probabilities of one RSC code.

    Forward chains start from the known trellis start state (member 0); backward
    chains start from the fully uncertain distribution, the condition at an
    unterminated trellis end. Both choices only matter when the chain has more
    than one stationary distribution.
    """

    trellis: Trellis
    forward: DistributionAlphabet
    backward: DistributionAlphabet
    mf: BilinearMatrix
    mb: BilinearMatrix
    indicator: ErasureIndicator
    kernel_args: tuple = field(init=False, repr=False)

    def __post_init__(self):
        # float copies consumed by the numba kernels
        object.__setattr__(self, "kernel_args", (
            self.mf.coef.astype(float),
            self.mb.coef.astype(float),
            self.indicator.A.astype(float),
            self.indicator.B.astype(float),
        ))

    @property
    def spec(self) -> RscSpec:
        return self.trellis.spec

    @property
    def backward_start(self) -> int:
        return self.backward.full_index


def analyze(code: RscSpec | Trellis | str) -> ErasureAnalysis:
    if isinstance(code, str):
        code = RscSpec.parse(code)
    trellis = code if isinstance(code, Trellis) else build_trellis(code)
    fwd = enumerate_alphabet(trellis, FORWARD)
    bwd = enumerate_alphabet(trellis, BACKWARD)
    return ErasureAnalysis(
        trellis,
        fwd,
        bwd,
        build_transition_matrix(trellis, fwd),
        build_transition_matrix(trellis, bwd),
        build_erasure_indicator(trellis, fwd, bwd),
    )


def _as_pattern(X) -> PuncturePattern:
    if X is None:
        return PuncturePattern((1,))
    if isinstance(X, PuncturePattern):
        return X
    return PuncturePattern(tuple(X))


def _check_prob(name: str, x) -> None:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise ValueError(f"{name} must lie in [0, 1]")


def punctured_extrinsic_probability(analysis: ErasureAnalysis, p, q, X=None):
    """Extrinsic erasure probability under periodic puncturing ``X``.

    ``p`` and ``q`` may be arrays (broadcast together); a float is returned for
    scalar input.
    """
    _check_prob("p", p)
    _check_prob("q", q)
    pattern = _as_pattern(X)
    p_arr, q_arr = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
    cf, cb, A, B = analysis.kernel_args
    vals, res = _pext_many(
        cf, cb, A, B, pattern.as_array(),
        np.ascontiguousarray(p_arr.ravel()), np.ascontiguousarray(q_arr.ravel()),
        0, analysis.backward_start,
    )
    if res < 0:
        raise StationaryError(f"window chain for pattern {pattern} did not converge", -res)
    vals = vals.reshape(p_arr.shape)
    return float(vals) if vals.ndim == 0 else vals


def extrinsic_probability(analysis: ErasureAnalysis, p, q):
    """Unpunctured extrinsic erasure probability ``pi_F(p,q) T(q) pi_B(p,q)^t``."""
    return punctured_extrinsic_probability(analysis, p, q, None)


def window_matrices(analysis: ErasureAnalysis, X, p: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Through-the-window forward and backward transition matrices at ``(p, q)``."""
    pattern = _as_pattern(X)
    mats_f = [analysis.mf(p, q if x else 1.0) for x in pattern.bits]
    mats_b = [analysis.mb(p, q if x else 1.0) for x in reversed(pattern.bits)]
    return np.linalg.multi_dot(mats_f + [np.eye(len(analysis.forward))]), np.linalg.multi_dot(
        mats_b + [np.eye(len(analysis.backward))]
    )


def position_probabilities(analysis: ErasureAnalysis, p: float, q: float, X) -> np.ndarray:
    """Per-window-position extrinsic erasure probabilities (numpy path, for inspection)."""
    pattern = _as_pattern(X)
    x = pattern.bits
    G = pattern.period
    MF, MB = window_matrices(analysis, pattern, p, q)
    fwd = [stationary(MF, 0)]
    for g in range(1, G):
        fwd.append(fwd[-1] @ analysis.mf(p, q if x[g - 1] else 1.0))
    bwd = [stationary(MB, analysis.backward_start)]
    for g in range(G - 2, -1, -1):
        bwd.insert(0, bwd[0] @ analysis.mb(p, q if x[g + 1] else 1.0))
    return np.array(
        [fwd[g] @ analysis.indicator(q if x[g] else 1.0) @ bwd[g] for g in range(G)]
    )


@dataclass(frozen=True)
class CatastrophicCheck:
    catastrophic: bool
    witness: float

    def __bool__(self) -> bool:
        return self.catastrophic


def is_catastrophic(analysis: ErasureAnalysis, X, qs: Iterable[float] = CATASTROPHIC_QS) -> CatastrophicCheck:
    """Positive extrinsic erasure probability with perfect a-priori information."""
    qs = np.asarray(list(qs), dtype=float)
    vals = punctured_extrinsic_probability(analysis, np.zeros_like(qs), qs, X)
    worst = float(np.max(vals))
    return CatastrophicCheck(worst > CATASTROPHIC_EPS, worst)

