"""Irregular turbo encoder and hard-input hard-output peeling decoder for the BEC.

Symbols are ``int8`` arrays with ``ERASED = -1`` marking an erasure.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .density import TurboEnsemble
from .peg import Interleaver
from .trellis import Trellis, build_trellis, rsc_encode

ERASED = -1
DEFAULT_MAX_ITERATIONS = 200


class InvalidReceivedWord(ValueError):
    """The received symbols admit no trellis path (impossible on a true erasure channel)."""


@dataclass(frozen=True)
class Codeword:
    systematic: np.ndarray
    parity: np.ndarray  # unpunctured steps only

    @property
    def symbols(self) -> int:
        return self.systematic.shape[0] + self.parity.shape[0]


@dataclass(frozen=True)
class ReceivedWord:
    systematic: np.ndarray
    parity: np.ndarray


@dataclass(frozen=True)
class DecodeResult:
    decoded: np.ndarray
    resolved_all: bool
    iterations_used: int
    unresolved_bits: np.ndarray
    ambiguous_steps: np.ndarray
    bit_degrees: np.ndarray


@dataclass(frozen=True)
class StoppingSet:
    bits: np.ndarray
    degrees: np.ndarray
    steps: np.ndarray

    @property
    def size(self) -> int:
        return self.bits.shape[0]


class TurboCode:
    """An ensemble tied to one interleaver, with the per-step tables the codec needs."""

    def __init__(self, ensemble: TurboEnsemble, interleaver: Interleaver, trellis: Trellis | None = None):
        if interleaver.N != ensemble.N or interleaver.K != ensemble.K:
            raise ValueError(
                f"interleaver (K={interleaver.K}, N={interleaver.N}) does not match "
                f"ensemble (K={ensemble.K}, N={ensemble.N})"
            )
        if not np.array_equal(interleaver.degrees, ensemble.degrees):
            raise ValueError("interleaver bit degrees differ from the ensemble's rounded counts")
        self.ensemble = ensemble
        self.interleaver = interleaver
        self.trellis = trellis or build_trellis(ensemble.constituent)
        self.step_bit = interleaver.step_bits()
        self.sent = ensemble.pattern.tiled(ensemble.N).astype(bool)
        self.degrees = interleaver.degrees

    @property
    def K(self) -> int:
        return self.ensemble.K

    @property
    def N(self) -> int:
        return self.ensemble.N

    @property
    def length(self) -> int:
        return self.K + int(self.sent.sum())

    def encode(self, info: Sequence[int]) -> Codeword:
        info = np.asarray(info, dtype=np.int8)
        if info.shape != (self.K,):
            raise ValueError(f"expected {self.K} information bits, got {info.shape}")
        parity = rsc_encode(self.trellis, info[self.step_bit], 0)
        return Codeword(info.copy(), parity[self.sent])

    def step_parity(self, received: ReceivedWord) -> np.ndarray:
        """Parity observation of every trellis step, punctured steps erased."""
        if received.parity.shape != (int(self.sent.sum()),):
            raise ValueError("parity length does not match the puncturing pattern")
        out = np.full(self.N, ERASED, np.int8)
        out[self.sent] = received.parity
        return out

    def decode(self, received: ReceivedWord, max_iterations: int = DEFAULT_MAX_ITERATIONS) -> DecodeResult:
        if received.systematic.shape != (self.K,):
            raise ValueError(f"expected {self.K} systematic symbols")
        bits = np.asarray(received.systematic, dtype=np.int8).copy()
        parity = self.step_parity(received)
        S = self.trellis.num_states
        F = np.empty(self.N + 1, np.int64)
        iters = _peel(self.trellis.next_state, self.trellis.parity, self.step_bit, bits, parity,
                      F, max_iterations, (1 << S) - 1)
        if iters < 0:
            raise InvalidReceivedWord("received word is inconsistent with every trellis path")
        unresolved = np.flatnonzero(bits == ERASED)
        steps = np.flatnonzero(bits[self.step_bit] == ERASED)
        return DecodeResult(bits, unresolved.size == 0, int(iters), unresolved, steps, self.degrees)

    def ml_decode(self, received: ReceivedWord) -> tuple[np.ndarray, int]:
        """Exhaustive erasure decoding: bitwise consensus of all consistent info words.

        Returns the consensus (erased where the candidates disagree) and the
        number of consistent information words. Exponential in the number of
        erased systematic bits.
        """
        sys_rx = np.asarray(received.systematic, dtype=np.int8)
        par_rx = np.asarray(received.parity, dtype=np.int8)
        free = np.flatnonzero(sys_rx == ERASED)
        if free.size > 20:
            raise ValueError("too many erased bits for exhaustive decoding")
        seen = par_rx != ERASED
        consistent = []
        info = sys_rx.copy()
        for guess in itertools.product((0, 1), repeat=free.size):
            info[free] = guess
            cw = self.encode(info)
            if np.array_equal(cw.parity[seen], par_rx[seen]):
                consistent.append(info.copy())
        if not consistent:
            raise InvalidReceivedWord("no codeword matches the received symbols")
        stack = np.array(consistent)
        out = np.where(np.all(stack == stack[0], axis=0), stack[0], ERASED).astype(np.int8)
        return out, len(consistent)


@njit(cache=True)
def _peel(nxt, par, step_bit, bits, parity, F, max_iter, full):
    N = step_bit.shape[0]
    S = nxt.shape[0]
    F[:] = full
    F[0] = 1  # start state 0; the final state is left free
    used = 0
    for _ in range(max_iter):
        resolved = 0
        changed = False
        for sweep in range(2):
            for i in range(N):
                j = i if sweep == 0 else N - 1 - i
                bit = step_bit[j]
                known_b = bits[bit]
                known_c = parity[j]
                lmask = 0
                rmask = 0
                bseen = 0
                cseen = 0
                fl = F[j]
                fr = F[j + 1]
                for s in range(S):
                    if not (fl >> s) & 1:
                        continue
                    for b in range(2):
                        if known_b >= 0 and b != known_b:
                            continue
                        c = par[s, b]
                        if known_c >= 0 and c != known_c:
                            continue
                        r = nxt[s, b]
                        if not (fr >> r) & 1:
                            continue
                        lmask |= 1 << s
                        rmask |= 1 << r
                        bseen |= 1 << b
                        cseen |= 1 << c
                if lmask == 0:
                    return -1
                if lmask != fl or rmask != fr:
                    changed = True
                    F[j] = lmask
                    F[j + 1] = rmask
                if known_b < 0 and bseen != 3:
                    bits[bit] = 0 if bseen == 1 else 1
                    resolved += 1
                if known_c < 0 and cseen != 3:
                    parity[j] = 0 if cseen == 1 else 1
        if resolved:
            used += 1
        elif not changed:
            break
    return used


def turbo_encode(info: Sequence[int], ensemble: TurboEnsemble, interleaver: Interleaver) -> Codeword:
    return TurboCode(ensemble, interleaver).encode(info)


def hiho_peel_decode(received: ReceivedWord, ensemble: TurboEnsemble, interleaver: Interleaver,
                     max_iterations: int = DEFAULT_MAX_ITERATIONS) -> DecodeResult:
    """Peel erasures by alternating forward and backward sweeps over per-step feasible state sets.

    A bit resolved at one of its trellis steps is known at all its other
    steps immediately, because its copies share one value cell. One forward
    plus one backward sweep is one iteration; ``iterations_used`` counts the
    iterations that resolved at least one new bit.
    """
    return TurboCode(ensemble, interleaver).decode(received, max_iterations)


def detect_stopping_set(result: DecodeResult) -> StoppingSet:
    if result.resolved_all:
        raise ValueError("decoding succeeded; there is no stopping set")
    bits = result.unresolved_bits
    return StoppingSet(bits, result.bit_degrees[bits], result.ambiguous_steps)


def erase(codeword: Codeword, sys_mask: np.ndarray, parity_mask: Optional[np.ndarray] = None) -> ReceivedWord:
    """Received word with the masked positions erased."""
    s = np.where(sys_mask, ERASED, codeword.systematic).astype(np.int8)
    p = codeword.parity if parity_mask is None else np.where(parity_mask, ERASED, codeword.parity)
    return ReceivedWord(s, np.asarray(p, dtype=np.int8))
