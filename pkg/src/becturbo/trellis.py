"""Recursive systematic convolutional (RSC) codes: generator parsing, trellis, encoder.

State numbering: the register cell holding the most recent feedback value is
the most significant bit of the state index, so ``next = (a << (nu-1)) | (s >> 1)``
where ``a`` is the feedback sum of the current step.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

_SPEC_RE = re.compile(r"^\(?\s*1\s*,\s*([0-7]+)\s*/\s*([0-7]+)\s*\)?(?:_?8)?$")


@dataclass(frozen=True)
class RscSpec:
    """Generators of a rate-1/2 RSC code.

    Bit ``i`` of a polynomial mask is the tap on register cell ``i``; tap 0 is
    the current feedback value.
    """

    feedback_poly: int
    feedforward_poly: int
    memory: int
    k: int = 1
    n: int = 2

    def __post_init__(self):
        if self.k != 1 or self.n != 2:
            raise ValueError(f"only rate 1/2 constituents are supported (got k={self.k}, n={self.n})")
        if self.memory < 1:
            raise ValueError(f"memory must be >= 1 (got {self.memory})")
        for name, poly in (("feedback", self.feedback_poly), ("feedforward", self.feedforward_poly)):
            if poly < 0:
                raise ValueError(f"{name} polynomial must be nonnegative")
            if poly.bit_length() - 1 > self.memory:
                raise ValueError(
                    f"{name} polynomial {poly:o} (octal) has a tap above memory {self.memory}"
                )
        if not self.feedback_poly & 1:
            raise ValueError(f"feedback polynomial {self.feedback_poly:o} (octal) must have tap 0 set")
        if self.feedforward_poly == 0:
            raise ValueError("feedforward polynomial must be nonzero")

    @classmethod
    def parse(cls, text: str) -> "RscSpec":
        """Parse octal notation such as ``"1,5/7"`` or ``"(1,15/13)_8"`` (feedforward/feedback)."""
        m = _SPEC_RE.match(text.strip())
        if m is None:
            raise ValueError(f"cannot parse generator spec {text!r}; expected e.g. '1,5/7'")
        ff, fb = int(m.group(1), 8), int(m.group(2), 8)
        memory = max(ff.bit_length(), fb.bit_length()) - 1
        return cls(feedback_poly=fb, feedforward_poly=ff, memory=memory)

    @property
    def num_states(self) -> int:
        return 1 << self.memory

    @property
    def constraint_length(self) -> int:
        return self.memory + 1

    @property
    def rate(self) -> float:
        return self.k / self.n

    def __str__(self) -> str:
        return f"(1,{self.feedforward_poly:o}/{self.feedback_poly:o})_8"


class Edge(NamedTuple):
    l: int
    r: int
    b: int
    c: int


@dataclass(frozen=True, eq=False)
class Trellis:
    """Edge structure of an RSC code.

    ``next_state[s, b]`` and ``parity[s, b]`` describe the edge leaving state
    ``s`` with input bit ``b``.
    """

    spec: RscSpec
    next_state: np.ndarray
    parity: np.ndarray

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def edges(self) -> list[Edge]:
        return [
            Edge(s, int(self.next_state[s, b]), b, int(self.parity[s, b]))
            for s in range(self.num_states)
            for b in (0, 1)
        ]


def build_trellis(spec: RscSpec) -> Trellis:
    nu = spec.memory
    S = spec.num_states
    nxt = np.zeros((S, 2), dtype=np.int64)
    par = np.zeros((S, 2), dtype=np.int64)
    for s in range(S):
        # cells[i-1] holds the feedback value from i steps ago
        cells = [(s >> (nu - i)) & 1 for i in range(1, nu + 1)]
        for b in (0, 1):
            a = b
            for i in range(1, nu + 1):
                if (spec.feedback_poly >> i) & 1:
                    a ^= cells[i - 1]
            c = a & spec.feedforward_poly & 1
            for i in range(1, nu + 1):
                if (spec.feedforward_poly >> i) & 1:
                    c ^= cells[i - 1]
            nxt[s, b] = (a << (nu - 1)) | (s >> 1)
            par[s, b] = c
    nxt.setflags(write=False)
    par.setflags(write=False)
    trellis = Trellis(spec, nxt, par)
    _check_trellis(trellis)
    return trellis


def _check_trellis(trellis: Trellis) -> None:
    S = trellis.num_states
    incoming = np.bincount(trellis.next_state.ravel(), minlength=S)
    if not np.all(incoming == 2):
        raise ValueError(f"{trellis.spec} does not give a valid trellis (in-degrees {incoming.tolist()})")
    if trellis.next_state[0, 0] != 0 or trellis.parity[0, 0] != 0:
        raise ValueError("the all-zero path must be a codeword")


def reachable_within(trellis: Trellis, steps: int, start: int = 0) -> set[int]:
    """States reachable from ``start`` in at most ``steps`` transitions (BFS)."""
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        s, depth = frontier.popleft()
        if depth == steps:
            continue
        for b in (0, 1):
            r = int(trellis.next_state[s, b])
            if r not in seen:
                seen.add(r)
                frontier.append((r, depth + 1))
    return seen


def rsc_encode(trellis: Trellis, info: Sequence[int], start_state: int = 0) -> np.ndarray:
    """Parity sequence produced by feeding ``info`` into the encoder from ``start_state``."""
    if not 0 <= start_state < trellis.num_states:
        raise ValueError(f"start state {start_state} out of range [0, {trellis.num_states})")
    info = np.asarray(info, dtype=np.int64)
    return _encode(trellis.next_state, trellis.parity, info, start_state)


@njit(cache=True)
def _encode(nxt, par, info, s):
    out = np.empty(info.shape[0], dtype=np.int8)
    for i in range(info.shape[0]):
        b = info[i]
        out[i] = par[s, b]
        s = nxt[s, b]
    return out
