"""Degree-profile search by differential evolution (rand/1/bin)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .density import (
    DegreeProfile,
    InfeasibleRate,
    puncture_fraction_for_rate,
    threshold,
    uniform_pattern,
)
from .erasure import ErasureAnalysis, PuncturePattern, analyze
from .trellis import RscSpec

log = logging.getLogger(__name__)

SEARCH_WIDTH = 1e-3
FINAL_WIDTH = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    population_size: int = 40
    scale_factor: float = 0.5
    crossover_rate: float = 0.9
    generations: int = 200
    seed: int = 0
    d_max: int = 12
    active_degrees: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("rand/1 mutation needs a population of at least 4")
        if not 0 < self.scale_factor <= 2:
            raise ValueError("scale factor must be in (0, 2]")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover rate must be in [0, 1]")
        if self.d_max < 2:
            raise ValueError("d_max must be >= 2")
        degs = self.degrees
        if not degs or min(degs) < 2 or max(degs) > self.d_max:
            raise ValueError(f"active degrees must lie in 2..{self.d_max}")

    @property
    def degrees(self) -> tuple[int, ...]:
        if self.active_degrees is None:
            return tuple(range(2, self.d_max + 1))
        return tuple(sorted(set(self.active_degrees)))


@dataclass(frozen=True)
class Candidate:
    profile: DegreeProfile
    phi_p: float
    pattern: PuncturePattern
    p_th: float


@dataclass
class OptimizerResult:
    profile: DegreeProfile
    phi_p: float
    pattern: PuncturePattern
    p_th: float
    history: list = field(default_factory=list)  # best Candidate after each generation
    evaluations: int = 0


class _Fitness:
    def __init__(self, analysis: ErasureAnalysis, degrees, rate: float):
        self.analysis = analysis
        self.degrees = degrees
        self.rate = rate
        self.evaluations = 0

    def candidate(self, x: np.ndarray, width: float = SEARCH_WIDTH) -> Optional[Candidate]:
        """Score an individual, or ``None`` when it cannot be turned into a valid ensemble."""
        s = x.sum()
        if not np.all(np.isfinite(x)) or s <= 0:
            return None
        profile = DegreeProfile({d: v / s for d, v in zip(self.degrees, x) if v > 0})
        try:
            phi = puncture_fraction_for_rate(profile, self.analysis.spec.rate, self.rate)
            pattern = uniform_pattern(phi, analysis=self.analysis)
        except (InfeasibleRate, ValueError):
            return None
        self.evaluations += 1
        p_th = threshold(profile, self.analysis, pattern, width=width).p_th
        return Candidate(profile, phi, pattern, p_th)


def _repair(trial: np.ndarray, parent: np.ndarray) -> np.ndarray:
    x = np.clip(trial, 0.0, None)
    s = x.sum()
    return x / s if s > 0 else parent.copy()


def optimize(
    rate: float,
    constituent: RscSpec | str,
    config: OptimizerConfig = OptimizerConfig(),
    callback: Callable[[int, Candidate], None] | None = None,
    analysis: ErasureAnalysis | None = None,
) -> OptimizerResult:
    """Maximize the density-evolution threshold over degree profiles at a target rate.

    Individuals live in the nonnegative orthant over the active degrees and are
    normalized before scoring; the puncturing pattern of each individual is the
    uniform pattern for its puncturing fraction. ``callback(generation, best)``
    is called after the initial population (generation 0) and every generation.
    All random draws happen in the sequential loop, so the result depends only
    on ``config.seed``.
    """
    if isinstance(constituent, str):
        constituent = RscSpec.parse(constituent)
    analysis = analysis or analyze(constituent)
    degrees = config.degrees
    fit = _Fitness(analysis, degrees, rate)
    rng = np.random.default_rng(config.seed)
    NP, D = config.population_size, len(degrees)

    if D == 1:
        cand = fit.candidate(np.ones(1))
        if cand is None:
            raise ValueError(f"rate {rate} is infeasible with the single degree {degrees[0]}")
        best = _finalize(fit, np.ones(1))
        result = OptimizerResult(best.profile, best.phi_p, best.pattern, best.p_th, [cand], fit.evaluations)
        if callback:
            callback(0, cand)
        return result

    pop = rng.random((NP, D))
    pop /= pop.sum(axis=1, keepdims=True)
    scored = [fit.candidate(x) for x in pop]
    if all(c is None for c in scored):
        raise ValueError(f"no feasible individual in the initial population for rate {rate}")
    # infeasible initial individuals are redrawn as copies of feasible ones
    feasible = [i for i, c in enumerate(scored) if c is not None]
    for i, c in enumerate(scored):
        if c is None:
            j = feasible[int(rng.integers(len(feasible)))]
            pop[i], scored[i] = pop[j].copy(), scored[j]
    fitness = np.array([c.p_th for c in scored])

    best_idx = int(np.argmax(fitness))
    best_x, best = pop[best_idx].copy(), scored[best_idx]
    history = [best]
    if callback:
        callback(0, best)

    for gen in range(1, config.generations + 1):
        trials = np.empty_like(pop)
        for i in range(NP):
            r1, r2, r3 = rng.choice([j for j in range(NP) if j != i], size=3, replace=False)
            mutant = pop[r1] + config.scale_factor * (pop[r2] - pop[r3])
            cross = rng.random(D) < config.crossover_rate
            cross[rng.integers(D)] = True
            trials[i] = _repair(np.where(cross, mutant, pop[i]), pop[i])
        for i in range(NP):
            cand = fit.candidate(trials[i])
            if cand is None:
                continue
            if cand.p_th >= fitness[i]:
                pop[i], fitness[i], scored[i] = trials[i], cand.p_th, cand
                if cand.p_th > best.p_th:
                    best_x, best = trials[i].copy(), cand
        history.append(best)
        log.debug("generation %d: best p_th %.4f (%s)", gen, best.p_th, best.profile)
        if callback:
            callback(gen, best)

    final = _finalize(fit, best_x)
    return OptimizerResult(final.profile, final.phi_p, final.pattern, final.p_th, history, fit.evaluations)


def _finalize(fit: _Fitness, x: np.ndarray) -> Candidate:
    cand = fit.candidate(x, width=FINAL_WIDTH)
    assert cand is not None
    return cand
