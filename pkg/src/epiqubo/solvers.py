"""Seeded minimizers for the quadratic binary objectives.

All solvers share one contract: deterministic given (problem, config),
reported objective exactly equal to re-evaluating the returned bits, and a
nonincreasing best-so-far trace indexed by objective-evaluation count.
Randomness comes from a PCG64 stream seeded per run; restarts draw from
spawned substreams so multi-restart runs stay reproducible regardless of
scheduling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .qubo import QuboProblem, batch_evaluate, evaluate

__all__ = [
    "SolverConfig",
    "SolveResult",
    "incremental_delta",
    "solve_exhaustive",
    "solve_simulated_annealing",
    "solve_tabu",
    "solve_genetic",
    "solve",
    "SOLVER_NAMES",
]

EXHAUSTIVE_MAX_BITS = 25
_BLOCK_BITS = 16

SOLVER_NAMES = ("exhaustive", "sa", "tabu", "ga")


@dataclass(frozen=True)
class SolverConfig:
    """Common knobs plus per-method settings; None means a size-derived default.

    Defaults: SA probes 100 random single flips for its starting temperature,
    cools by 0.97 down to 1e-3 of the start with 10*M flips per level; tabu
    tenure is ceil(M/10)+1 with a 50*M stagnation cap; the GA runs 4*M
    individuals for 200 generations with 0.9 crossover and 1/M mutation.
    """

    seed: int = 0
    budget: int = 5_000_000
    sa_initial_temperature: float | None = None
    sa_final_temperature_ratio: float = 1e-3
    sa_cooling_ratio: float = 0.97
    sa_sweeps_per_temperature: int = 10
    ts_tenure: int | None = None
    ts_stagnation_limit: int | None = None
    ts_restarts: int = 10
    ga_population: int | None = None
    ga_crossover_rate: float = 0.9
    ga_mutation_rate: float | None = None
    ga_generations: int = 200
    ga_tournament_size: int = 3
    ga_elitism: int = 1

    def validate(self) -> None:
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.sa_initial_temperature is not None and self.sa_initial_temperature <= 0:
            raise ValueError("initial temperature must be positive")
        if not (0.0 < self.sa_final_temperature_ratio < 1.0):
            raise ValueError("final temperature ratio must lie in (0, 1)")
        if not (0.0 < self.sa_cooling_ratio < 1.0):
            raise ValueError("cooling ratio must lie in (0, 1)")
        if self.sa_sweeps_per_temperature < 1:
            raise ValueError("sweeps per temperature must be positive")
        if self.ts_tenure is not None and self.ts_tenure < 1:
            raise ValueError("tabu tenure must be positive")
        if self.ts_stagnation_limit is not None and self.ts_stagnation_limit < 1:
            raise ValueError("stagnation limit must be positive")
        if self.ts_restarts < 1:
            raise ValueError("restart count must be positive")
        if self.ga_population is not None and self.ga_population < 1:
            raise ValueError("population size must be positive")
        if not (0.0 <= self.ga_crossover_rate <= 1.0):
            raise ValueError("crossover rate must lie in [0, 1]")
        if self.ga_mutation_rate is not None and not (0.0 <= self.ga_mutation_rate <= 1.0):
            raise ValueError("mutation rate must lie in [0, 1]")
        if self.ga_generations < 1:
            raise ValueError("generation count must be positive")
        if self.ga_tournament_size < 1:
            raise ValueError("tournament size must be positive")
        if self.ga_elitism < 0:
            raise ValueError("elitism must be nonnegative")


@dataclass(frozen=True)
class SolveResult:
    """Solver outcome; ``objective`` always equals evaluate(q, z_best)."""

    z_best: np.ndarray
    objective: float
    evaluations: int
    wall_time: float
    trace: list[tuple[int, float]] | None = None


def incremental_delta(q: QuboProblem, z, i: int) -> float:
    """Objective change from flipping bit ``i``, without a full re-evaluation.

    Uses the linear coefficient and one coupling row, so the work is
    proportional to the variable's degree rather than the problem size
    squared.
    """
    if not (0 <= i < q.m):
        raise IndexError(f"bit index {i} out of range for {q.m} variables")
    zz = np.asarray(z)
    return float((1 - 2 * int(zz[i])) * (q.linear[i] + q.coupling[i] @ zz))


def _bit_rows(count: int, width: int, first: int = 0) -> np.ndarray:
    ks = np.arange(count, dtype=np.int64) + first
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((ks[:, None] >> shifts) & 1).astype(np.int8)


def solve_exhaustive(q: QuboProblem) -> SolveResult:
    """Scan every assignment; ties break to the lexicographically smallest z.

    Assignments are enumerated in lexicographic order of the bit vector and
    compared strictly, so the first optimum encountered wins.  Refuses more
    than 25 variables.
    """
    m = q.m
    if m > EXHAUSTIVE_MAX_BITS:
        raise ValueError(f"{m} variables exceed the enumeration limit of {EXHAUSTIVE_MAX_BITS}")
    start = time.perf_counter()
    total = 1 << m
    low_bits = min(m, _BLOCK_BITS)
    high_bits = m - low_bits
    s = q.coupling
    p = q.linear

    zl = _bit_rows(1 << low_bits, low_bits).astype(np.float64)
    p_low = p[high_bits:]
    s_low = s[high_bits:, high_bits:]
    base_low = zl @ p_low + 0.5 * np.einsum("bi,ij,bj->b", zl, s_low, zl)

    trace: list[tuple[int, float]] = []
    best_val = np.inf
    best_bits: np.ndarray | None = None
    evals = 0
    if high_bits == 0:
        values = q.offset + base_low
        k = int(np.argmin(values))
        best_val = float(values[k])
        best_bits = zl[k].astype(np.int8)
        evals = total
        trace.append((evals, best_val))
    else:
        p_high = p[:high_bits]
        s_high = s[:high_bits, :high_bits]
        cross = s[:high_bits, high_bits:]
        for kh in range(1 << high_bits):
            zh = _bit_rows(1, high_bits, kh)[0].astype(np.float64)
            const = q.offset + zh @ p_high + 0.5 * zh @ s_high @ zh
            values = const + base_low + (zh @ cross) @ zl.T
            k = int(np.argmin(values))
            evals += zl.shape[0]
            if values[k] < best_val:
                best_val = float(values[k])
                best_bits = np.concatenate([zh.astype(np.int8), zl[k].astype(np.int8)])
                trace.append((evals, best_val))
    assert best_bits is not None
    return SolveResult(
        z_best=best_bits,
        objective=evaluate(q, best_bits),
        evaluations=evals,
        wall_time=time.perf_counter() - start,
        trace=trace,
    )


def solve_simulated_annealing(q: QuboProblem, cfg: SolverConfig) -> SolveResult:
    """Single-flip Metropolis annealing on a geometric temperature ladder.

    The local-field vector makes each proposal an O(1) delta; accepted flips
    update it in O(M).  The starting temperature defaults to the largest
    single-flip delta magnitude seen over 100 random probes.
    """
    cfg.validate()
    m = q.m
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    start = time.perf_counter()
    p = q.linear
    s = q.coupling

    z = rng.integers(0, 2, size=m, dtype=np.int8)
    fields = p + s @ z
    value = evaluate(q, z)
    evals = 1
    best_val = value
    best_z = z.copy()
    trace = [(evals, best_val)]

    def finish() -> SolveResult:
        return SolveResult(
            z_best=best_z,
            objective=evaluate(q, best_z),
            evaluations=evals,
            wall_time=time.perf_counter() - start,
            trace=trace,
        )

    if evals >= cfg.budget:
        return finish()

    t0 = cfg.sa_initial_temperature
    if t0 is None:
        probe_max = 0.0
        for _ in range(100):
            if evals >= cfg.budget:
                return finish()
            zp = rng.integers(0, 2, size=m, dtype=np.int8)
            i = int(rng.integers(m))
            delta = (1 - 2 * int(zp[i])) * float(p[i] + s[i] @ zp)
            evals += 1
            probe_max = max(probe_max, abs(delta))
        t0 = probe_max if probe_max > 0.0 else 1.0

    temp = t0
    t_final = t0 * cfg.sa_final_temperature_ratio
    flips_per_level = cfg.sa_sweeps_per_temperature * m
    while temp > t_final and evals < cfg.budget:
        for _ in range(flips_per_level):
            if evals >= cfg.budget:
                break
            i = int(rng.integers(m))
            step = 1 - 2 * int(z[i])
            delta = step * float(fields[i])
            evals += 1
            if delta <= 0.0 or rng.random() < math.exp(-delta / temp):
                value += delta
                fields += s[:, i] * step
                z[i] += step
                if value < best_val:
                    # the running value accumulates roundoff; accept a new
                    # best only if the exact objective confirms it
                    exact = evaluate(q, z)
                    if exact < best_val:
                        best_val = exact
                        best_z = z.copy()
                        trace.append((evals, best_val))
                    value = exact
        temp *= cfg.sa_cooling_ratio
    return finish()


def solve_tabu(q: QuboProblem, cfg: SolverConfig) -> SolveResult:
    """Steepest single-flip descent with a recency tabu list.

    The best admissible move is applied even when it worsens the value; a
    move is admissible when its bit left the tabu list or when it would beat
    the best value ever seen (aspiration).  A descent ends after the
    configured stagnation span; fresh restarts draw from spawned substreams
    until the restart cap or the evaluation budget runs out.
    """
    cfg.validate()
    m = q.m
    start = time.perf_counter()
    p = q.linear
    s = q.coupling
    tenure = cfg.ts_tenure if cfg.ts_tenure is not None else math.ceil(m / 10) + 1
    stagnation_cap = (
        cfg.ts_stagnation_limit if cfg.ts_stagnation_limit is not None else 50 * m
    )
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.ts_restarts)

    evals = 0
    best_val = np.inf
    best_z: np.ndarray | None = None
    trace: list[tuple[int, float]] = []
    for stream in streams:
        if evals >= cfg.budget:
            break
        rng = np.random.default_rng(stream)
        z = rng.integers(0, 2, size=m, dtype=np.int8)
        fields = p + s @ z
        value = evaluate(q, z)
        evals += 1
        if value < best_val:
            best_val = value
            best_z = z.copy()
            trace.append((evals, best_val))
        tabu_until = np.zeros(m, dtype=np.int64)
        iteration = 0
        stagnant = 0
        while evals + m <= cfg.budget and stagnant < stagnation_cap:
            deltas = (1 - 2 * z) * fields
            evals += m
            admissible = (tabu_until <= iteration) | (value + deltas < best_val)
            if admissible.any():
                i = int(np.argmin(np.where(admissible, deltas, np.inf)))
            else:
                i = int(np.argmin(tabu_until))  # earliest-expiring move
            step = 1 - 2 * int(z[i])
            value += float(deltas[i])
            fields += s[:, i] * step
            z[i] += step
            tabu_until[i] = iteration + tenure
            iteration += 1
            if value < best_val:
                # confirm against the exact objective; the running value
                # drifts by roundoff and must not reset stagnation on its own
                exact = evaluate(q, z)
                value = exact
                if exact < best_val:
                    best_val = exact
                    best_z = z.copy()
                    trace.append((evals, best_val))
                    stagnant = 0
                else:
                    stagnant += 1
            else:
                stagnant += 1
    assert best_z is not None
    return SolveResult(
        z_best=best_z,
        objective=evaluate(q, best_z),
        evaluations=evals,
        wall_time=time.perf_counter() - start,
        trace=trace,
    )


def _tournament(rng: np.random.Generator, fitness: np.ndarray, size: int) -> int:
    picks = rng.integers(len(fitness), size=size)
    return int(picks[np.argmin(fitness[picks])])


def solve_genetic(q: QuboProblem, cfg: SolverConfig) -> SolveResult:
    """Generational GA: tournament parents, uniform crossover, bit mutation."""
    cfg.validate()
    m = q.m
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    start = time.perf_counter()
    pop_size = cfg.ga_population if cfg.ga_population is not None else 4 * m
    mutation = cfg.ga_mutation_rate if cfg.ga_mutation_rate is not None else 1.0 / m
    elite_count = min(cfg.ga_elitism, pop_size)

    pop = rng.integers(0, 2, size=(pop_size, m), dtype=np.int8)
    fitness = batch_evaluate(q, pop)
    evals = pop_size
    k = int(np.argmin(fitness))
    best_val = float(fitness[k])
    best_z = pop[k].copy()
    trace = [(evals, best_val)]

    for _ in range(cfg.ga_generations):
        if evals + pop_size > cfg.budget:
            break
        new_pop = np.empty_like(pop)
        elite_order = np.argsort(fitness, kind="stable")[:elite_count]
        new_pop[:elite_count] = pop[elite_order]
        for child_idx in range(elite_count, pop_size):
            p1 = _tournament(rng, fitness, cfg.ga_tournament_size)
            p2 = _tournament(rng, fitness, cfg.ga_tournament_size)
            if rng.random() < cfg.ga_crossover_rate:
                mask = rng.integers(0, 2, size=m, dtype=np.int8)
                child = np.where(mask == 1, pop[p1], pop[p2]).astype(np.int8)
            else:
                child = pop[p1].copy()
            if mutation > 0.0:
                flips = rng.random(m) < mutation
                child = np.where(flips, 1 - child, child).astype(np.int8)
            new_pop[child_idx] = child
        pop = new_pop
        fitness = batch_evaluate(q, pop)
        evals += pop_size
        k = int(np.argmin(fitness))
        if fitness[k] < best_val:
            best_val = float(fitness[k])
            best_z = pop[k].copy()
            trace.append((evals, best_val))
    return SolveResult(
        z_best=best_z,
        objective=evaluate(q, best_z),
        evaluations=evals,
        wall_time=time.perf_counter() - start,
        trace=trace,
    )


def solve(q: QuboProblem, method: str, cfg: SolverConfig | None = None) -> SolveResult:
    """Run the named solver; ``cfg`` is ignored by the exhaustive scan."""
    if method == "exhaustive":
        return solve_exhaustive(q)
    cfg = cfg if cfg is not None else SolverConfig()
    if method == "sa":
        return solve_simulated_annealing(q, cfg)
    if method == "tabu":
        return solve_tabu(q, cfg)
    if method == "ga":
        return solve_genetic(q, cfg)
    raise ValueError(f"unknown solver {method!r}; expected one of {SOLVER_NAMES}")


def with_seed(cfg: SolverConfig, seed: int) -> SolverConfig:
    """Copy of the config with a different seed."""
    return replace(cfg, seed=seed)
