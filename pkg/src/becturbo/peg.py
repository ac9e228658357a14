"""Progressive-edge-growth interleavers for irregular turbo codes.

The factor graph has information bit nodes, one transition node per trellis
step and the state nodes ``s_0..s_N`` of the chain ``s_j - t_j - s_{j+1}``.
Node ids used by the kernels: bits ``[0, K)``, transitions ``[K, K+N)``,
states ``[K+N, K+2N+1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numba import njit

from .density import DegreeProfile
from .erasure import PuncturePattern


def girth_upper_bound(N: int, k: int = 1) -> int:
    if N < 2 or k < 1:
        raise ValueError("need N >= 2 and k >= 1")
    inner = (N - 1) * k / (k + 2) + 1
    return 4 * (math.floor(_log_ratio(inner, k + 1)) + 1)


def girth_lower_bound(N: int, k: int = 1, d_max: int = 2) -> int:
    """Girth guaranteed by the PEG construction, never below 4.

    The graph is bipartite (transitions on one side, bits and states on the
    other) so no cycle is shorter than 4; tiny graphs where the formula gives
    less, or its log argument is not positive, report 4.
    """
    if N < 1 or k < 1 or d_max < 2:
        raise ValueError("need N >= 1, k >= 1, d_max >= 2")
    arg = N * (k + 2) * (1 - 1 / d_max) - N + 1
    base = (d_max - 1) * (k + 1)
    if arg <= 0 or base <= 1:
        return 4
    return max(4, 2 * (math.floor(_log_ratio(arg, base)) + 1))


def _log_ratio(x: float, base: float) -> float:
    # exact powers of the base must not fall just below an integer
    r = math.log(x) / math.log(base)
    return round(r) if abs(r - round(r)) < 1e-12 else r


@dataclass(eq=False)
class FactorGraph:
    """Bit/transition adjacency of an irregular turbo code.

    ``bit_adj[b, :bit_count[b]]`` lists the transitions of bit ``b`` in edge
    insertion order; ``edge_log`` holds every ``(bit, transition)`` edge in
    insertion order.
    """

    K: int
    N: int
    k: int
    degrees: np.ndarray
    bit_adj: np.ndarray
    bit_count: np.ndarray
    trans_bits: np.ndarray
    trans_count: np.ndarray
    punctured: np.ndarray
    edge_log: np.ndarray

    @classmethod
    def from_edges(cls, K: int, N: int, edges: Iterable[tuple[int, int]], k: int = 1,
                   degrees: Optional[Sequence[int]] = None) -> "FactorGraph":
        """Graph from an explicit edge list (target degrees default to the realized ones)."""
        edges = np.array(list(edges), dtype=np.int64).reshape(-1, 2)
        realized = np.bincount(edges[:, 0], minlength=K) if len(edges) else np.zeros(K, np.int64)
        degrees = np.asarray(realized if degrees is None else degrees, dtype=np.int64)
        dmax = max(int(degrees.max(initial=1)), int(realized.max(initial=1)))
        g = cls(K, N, k, degrees,
                np.full((K, dmax), -1, np.int64), np.zeros(K, np.int64),
                np.full((N, k), -1, np.int64), np.zeros(N, np.int64),
                np.zeros(N, np.bool_), edges)
        for b, t in edges:
            if g.trans_count[t] >= k:
                raise ValueError(f"transition {t} already hosts {k} bits")
            g.bit_adj[b, g.bit_count[b]] = t
            g.bit_count[b] += 1
            g.trans_bits[t, g.trans_count[t]] = b
            g.trans_count[t] += 1
        return g

    @property
    def complete(self) -> bool:
        return bool(np.all(self.bit_count == self.degrees) and np.all(self.trans_count == self.k))

    def neighbors(self, b: int) -> list[int]:
        return self.bit_adj[b, : self.bit_count[b]].tolist()


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _bfs_from_bit(root, K, N, bit_adj, bit_count, trans_bits, trans_count, dist, queue):
    """Fill ``dist`` (length K+2N+1, preset to -1) with BFS distances from bit ``root``."""
    head = 0
    tail = 0
    dist[root] = 0
    queue[tail] = root
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if u < K:
            for i in range(bit_count[u]):
                v = K + bit_adj[u, i]
                if dist[v] < 0:
                    dist[v] = du + 1
                    queue[tail] = v
                    tail += 1
        elif u < K + N:
            t = u - K
            for i in range(trans_count[t]):
                v = trans_bits[t, i]
                if dist[v] < 0:
                    dist[v] = du + 1
                    queue[tail] = v
                    tail += 1
            for v in (K + N + t, K + N + t + 1):
                if dist[v] < 0:
                    dist[v] = du + 1
                    queue[tail] = v
                    tail += 1
        else:
            s = u - K - N
            if s >= 1 and dist[K + s - 1] < 0:
                dist[K + s - 1] = du + 1
                queue[tail] = K + s - 1
                tail += 1
            if s < N and dist[K + s] < 0:
                dist[K + s] = du + 1
                queue[tail] = K + s
                tail += 1
    return tail


@njit(cache=True)
def _connect(b, t, bit_adj, bit_count, trans_bits, trans_count, log_b, log_t, n_log):
    bit_adj[b, bit_count[b]] = t
    bit_count[b] += 1
    trans_bits[t, trans_count[t]] = b
    trans_count[t] += 1
    log_b[n_log] = b
    log_t[n_log] = t
    return n_log + 1


@njit(cache=True)
def _lowest_degree(trans_count, k, punctured, unpunctured_only):
    best = -1
    for t in range(trans_count.shape[0]):
        if trans_count[t] >= k or (unpunctured_only and punctured[t]):
            continue
        if best < 0 or trans_count[t] < trans_count[best]:
            best = t
    return best


@njit(cache=True)
def _peg(degrees, N, k, punctured, prepass):
    K = degrees.shape[0]
    dmax = 1
    for b in range(K):
        dmax = max(dmax, degrees[b])
    bit_adj = np.full((K, dmax), -1, np.int64)
    bit_count = np.zeros(K, np.int64)
    trans_bits = np.full((N, k), -1, np.int64)
    trans_count = np.zeros(N, np.int64)
    E = 0
    for b in range(K):
        E += degrees[b]
    log_b = np.empty(E, np.int64)
    log_t = np.empty(E, np.int64)
    n_log = 0
    dist = np.empty(K + 2 * N + 1, np.int64)
    queue = np.empty(K + 2 * N + 1, np.int64)

    if prepass:
        # bits are grouped by increasing degree, so index order is degree order
        for b in range(K):
            t = _lowest_degree(trans_count, k, punctured, True)
            if t < 0:
                break
            n_log = _connect(b, t, bit_adj, bit_count, trans_bits, trans_count, log_b, log_t, n_log)

    start = 0
    while start < K:
        d = degrees[start]
        stop = start
        while stop < K and degrees[stop] == d:
            stop += 1
        for i in range(1, d + 1):
            for b in range(start, stop):
                if bit_count[b] >= i:
                    continue
                if bit_count[b] == 0:
                    t = _lowest_degree(trans_count, k, punctured, False)
                else:
                    dist[:] = -1
                    _bfs_from_bit(b, K, N, bit_adj, bit_count, trans_bits, trans_count, dist, queue)
                    t = -1
                    best_depth = -1
                    for c in range(N):
                        if trans_count[c] >= k:
                            continue
                        taken = False
                        for j in range(bit_count[b]):
                            if bit_adj[b, j] == c:
                                taken = True
                        if taken:
                            continue
                        depth = dist[K + c]
                        if depth < 0:
                            depth = 1 << 60
                        if (depth > best_depth
                                or (depth == best_depth and trans_count[c] < trans_count[t])):
                            best_depth = depth
                            t = c
                if t < 0:
                    return bit_adj, bit_count, trans_bits, trans_count, log_b, log_t, n_log
                n_log = _connect(b, t, bit_adj, bit_count, trans_bits, trans_count, log_b, log_t, n_log)
        start = stop
    return bit_adj, bit_count, trans_bits, trans_count, log_b, log_t, n_log


@njit(cache=True)
def _girth(K, N, bit_adj, bit_count, trans_bits, trans_count, with_states):
    """Shortest cycle length (0 if acyclic); every cycle passes through a bit node."""
    V = K + 2 * N + 1
    dist = np.empty(V, np.int64)
    parent = np.empty(V, np.int64)
    queue = np.empty(V, np.int64)
    nbr = np.empty(bit_adj.shape[1] + trans_bits.shape[1] + 4, np.int64)
    best = 1 << 60
    for root in range(K):
        dist[:] = -1
        parent[:] = -1
        dist[root] = 0
        queue[0] = root
        head, tail = 0, 1
        while head < tail:
            u = queue[head]
            head += 1
            if 2 * dist[u] + 1 >= best:
                break
            m = 0
            if u < K:
                for i in range(bit_count[u]):
                    nbr[m] = K + bit_adj[u, i]
                    m += 1
            elif u < K + N:
                t = u - K
                for i in range(trans_count[t]):
                    nbr[m] = trans_bits[t, i]
                    m += 1
                if with_states:
                    nbr[m] = K + N + t
                    nbr[m + 1] = K + N + t + 1
                    m += 2
                else:
                    if t >= 1:
                        nbr[m] = K + t - 1
                        m += 1
                    if t < N - 1:
                        nbr[m] = K + t + 1
                        m += 1
            else:
                s = u - K - N
                if s >= 1:
                    nbr[m] = K + s - 1
                    m += 1
                if s < N:
                    nbr[m] = K + s
                    m += 1
            for i in range(m):
                v = nbr[i]
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    queue[tail] = v
                    tail += 1
                elif v != parent[u]:
                    cyc = dist[u] + dist[v] + 1
                    if cyc < best:
                        best = cyc
    return 0 if best == 1 << 60 else best


# ---------------------------------------------------------------------------


def degree_sequence(K: int, profile: DegreeProfile) -> np.ndarray:
    counts = profile.counts(K)
    return np.repeat(list(counts), list(counts.values())).astype(np.int64)


def peg_build(K: int, profile: DegreeProfile | Sequence[int], k: int = 1,
              pattern: PuncturePattern | None = None, N: Optional[int] = None) -> FactorGraph:
    """Grow the bit/transition edges one at a time, each as far as possible from its bit.

    ``profile`` may also be an explicit per-bit degree sequence (grouped by
    increasing degree). With ``pattern``, every bit first gets one edge to an
    unpunctured transition (lowest degrees first while they last). ``N``
    defaults to ``sum(degrees) / k``; a smaller one is rejected.
    """
    degrees = (degree_sequence(K, profile) if isinstance(profile, DegreeProfile)
               else np.asarray(profile, dtype=np.int64))
    if degrees.shape[0] != K:
        raise ValueError(f"degree sequence has {degrees.shape[0]} entries, expected {K}")
    if np.any(np.diff(degrees) < 0):
        raise ValueError("bits must be grouped by increasing degree")
    total = int(degrees.sum())
    if total % k:
        raise ValueError(f"sum of degrees {total} is not a multiple of k={k}")
    if N is None:
        N = total // k
    elif N * k != total:
        raise ValueError(f"{N} transitions offer {N * k} slots for {total} bit copies")
    punctured = np.zeros(N, np.bool_) if pattern is None else pattern.tiled(N) == 0
    out = _peg(degrees, N, k, punctured, pattern is not None)
    bit_adj, bit_count, trans_bits, trans_count, log_b, log_t, n_log = out
    if n_log != total:
        raise RuntimeError(f"PEG placed {n_log} of {total} edges")
    return FactorGraph(K, N, k, degrees, bit_adj, bit_count, trans_bits, trans_count,
                       punctured, np.stack([log_b, log_t], axis=1))


@dataclass(frozen=True)
class Girth:
    raw: Optional[int]
    contracted: Optional[int]  # state nodes removed, consecutive transitions adjacent


def compute_girth(graph: FactorGraph, with_states: bool = True) -> Optional[int]:
    """Length of the shortest cycle, or ``None`` if the graph is acyclic."""
    g = _girth(graph.K, graph.N, graph.bit_adj, graph.bit_count, graph.trans_bits,
               graph.trans_count, with_states)
    return g or None


def girth_report(graph: FactorGraph) -> Girth:
    return Girth(compute_girth(graph, True), compute_girth(graph, False))


@dataclass(frozen=True, eq=False)
class Interleaver:
    """``perm[m]`` is the trellis step fed by symbol ``m`` of the repeated stream.

    The repeated stream lists bit 0's copies, then bit 1's, and so on; bit
    ``b`` appears ``degrees[b]`` times.
    """

    perm: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        if self.perm.shape[0] != int(self.degrees.sum()):
            raise ValueError("permutation length must equal the sum of bit degrees")
        if not np.array_equal(np.sort(self.perm), np.arange(self.perm.shape[0])):
            raise ValueError("interleaver is not a permutation")

    @property
    def N(self) -> int:
        return self.perm.shape[0]

    @property
    def K(self) -> int:
        return self.degrees.shape[0]

    def stream_bits(self) -> np.ndarray:
        """Bit index of every symbol of the repeated stream."""
        return np.repeat(np.arange(self.K), self.degrees)

    def step_bits(self) -> np.ndarray:
        """Bit index feeding every trellis step."""
        out = np.empty(self.N, np.int64)
        out[self.perm] = self.stream_bits()
        return out

    def to_graph(self) -> FactorGraph:
        return FactorGraph.from_edges(
            self.K, self.N, zip(self.stream_bits().tolist(), self.perm.tolist()), 1, self.degrees
        )


def graph_to_interleaver(graph: FactorGraph) -> Interleaver:
    if graph.k != 1:
        raise ValueError("interleavers are defined for k = 1 transitions")
    if not np.all(graph.trans_count == graph.k):
        bad = int(np.flatnonzero(graph.trans_count != graph.k)[0])
        raise ValueError(f"transition {bad} hosts {graph.trans_count[bad]} bits, expected {graph.k}")
    if not np.all(graph.bit_count == graph.degrees):
        raise ValueError("graph is incomplete")
    perm = np.concatenate([graph.bit_adj[b, : graph.degrees[b]] for b in range(graph.K)])
    return Interleaver(perm.astype(np.int64), graph.degrees.copy())


def random_interleaver(degrees: Sequence[int], rng: np.random.Generator) -> Interleaver:
    degrees = np.asarray(degrees, dtype=np.int64)
    return Interleaver(rng.permutation(int(degrees.sum())), degrees)
