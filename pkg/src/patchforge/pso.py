"""Bounded particle swarm minimizer with optional early stopping.

Standard inertia-weight PSO: each particle keeps a personal best, the
swarm keeps a global best, and per generation every velocity is pulled
toward both with cognitive/social coefficients.  r1/r2 can be fresh
uniform draws per particle per dimension (stochastic mode) or fixed
constants.  Velocities are capped, positions clamped to the bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

R_MODE_STOCHASTIC = "stochastic"
R_MODE_FIXED = "fixed"


class FitnessError(RuntimeError):
    """A fitness evaluation raised; carries the completed evaluation count."""

    def __init__(self, message: str, evaluations: int):
        super().__init__(message)
        self.evaluations = evaluations


@dataclass
class SwarmConfig:
    population: int = 100
    iterations: int = 10
    inertia: float = 0.9
    cognitive: float = 1.6
    social: float = 1.4
    r_mode: str = R_MODE_STOCHASTIC
    r1: float = 0.5
    r2: float = 0.5
    bounds: tuple[float, float] | Sequence[tuple[float, float]] = (0.0, 1.0)
    v_max: float | None = None  # None -> 0.5 * (hi - lo) per dimension
    seed: int = 0
    early_stop_threshold: float | None = None
    # When set together with a threshold, run() aborts mid-generation on the
    # first sub-threshold evaluation instead of finishing the generation.
    stop_within_generation: bool = False

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ValueError(f"population must be >= 1, got {self.population}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.r_mode not in (R_MODE_STOCHASTIC, R_MODE_FIXED):
            raise ValueError(f"unknown r_mode {self.r_mode!r}")


@dataclass
class SwarmState:
    """Population arrays plus bests; one row per particle.

    positions/velocities/pbest_positions are (population, dim); the
    per-particle personal bests live in pbest_positions/pbest_fitness.
    history records (generation, global best fitness, evaluations) per
    completed generation, plus one final partial row on a mid-generation
    abort.
    """

    positions: np.ndarray
    velocities: np.ndarray
    pbest_positions: np.ndarray
    pbest_fitness: np.ndarray
    gbest_position: np.ndarray
    gbest_fitness: float
    lo: np.ndarray
    hi: np.ndarray
    v_max: np.ndarray
    generation: int = 0
    total_evaluations: int = 0
    nan_count: int = 0
    history: list[tuple[int, float, int]] = field(default_factory=list)


@dataclass
class RunResult:
    best_position: np.ndarray
    best_fitness: float
    evaluations: int
    stopped_early: bool
    history: list[tuple[int, float, int]]
    nan_count: int


def _bounds_arrays(cfg: SwarmConfig, dim: int) -> tuple[np.ndarray, np.ndarray]:
    bounds = np.asarray(cfg.bounds, dtype=float)
    if bounds.shape == (2,):
        lo = np.full(dim, bounds[0])
        hi = np.full(dim, bounds[1])
    elif bounds.shape == (dim, 2):
        lo = bounds[:, 0].copy()
        hi = bounds[:, 1].copy()
    else:
        raise ValueError(f"bounds must be (lo, hi) or one pair per dimension, got shape {bounds.shape}")
    if np.any(lo >= hi):
        raise ValueError("every lower bound must be strictly below its upper bound")
    return lo, hi


def init_swarm(cfg: SwarmConfig, dim: int, rng: np.random.Generator) -> SwarmState:
    """Uniform random positions in bounds, velocities in [-v_max, v_max].

    Personal bests start unset (+inf fitness) until the first evaluation;
    the global best position is a placeholder until then.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    lo, hi = _bounds_arrays(cfg, dim)
    v_max = np.full(dim, cfg.v_max) if cfg.v_max is not None else 0.5 * (hi - lo)
    if np.any(v_max <= 0):
        raise ValueError("v_max must be positive")
    positions = rng.uniform(lo, hi, size=(cfg.population, dim))
    velocities = rng.uniform(-v_max, v_max, size=(cfg.population, dim))
    return SwarmState(
        positions=positions,
        velocities=velocities,
        pbest_positions=positions.copy(),
        pbest_fitness=np.full(cfg.population, math.inf),
        gbest_position=positions[0].copy(),
        gbest_fitness=math.inf,
        lo=lo,
        hi=hi,
        v_max=v_max,
    )


def _evaluate(
    state: SwarmState,
    fitness: Callable[[np.ndarray], float],
    cfg: SwarmConfig,
    abort_below: float | None = None,
) -> bool:
    """Evaluate every particle in index order, updating bests as it goes.

    NaN fitness counts as +inf (with a counter bump), never an error.
    Returns True if abort_below is set and some evaluation fell under it,
    in which case the remaining particles are left unevaluated.
    """
    for a in range(cfg.population):
        try:
            f = float(fitness(state.positions[a]))
        except Exception as exc:
            raise FitnessError(str(exc), state.total_evaluations) from exc
        if math.isnan(f):
            f = math.inf
            state.nan_count += 1
        state.total_evaluations += 1
        if f < state.pbest_fitness[a]:
            state.pbest_fitness[a] = f
            state.pbest_positions[a] = state.positions[a].copy()
        if f < state.gbest_fitness:
            state.gbest_fitness = f
            state.gbest_position = state.positions[a].copy()
        if abort_below is not None and f < abort_below:
            return True
    return False


def _advance(state: SwarmState, cfg: SwarmConfig, rng: np.random.Generator) -> None:
    """One velocity/position update for the whole population."""
    population, dim = state.positions.shape
    if cfg.r_mode == R_MODE_STOCHASTIC:
        r1 = rng.uniform(size=(population, dim))
        r2 = rng.uniform(size=(population, dim))
    else:
        r1 = cfg.r1
        r2 = cfg.r2
    v = (
        cfg.inertia * state.velocities
        + cfg.cognitive * r1 * (state.pbest_positions - state.positions)
        + cfg.social * r2 * (state.gbest_position - state.positions)
    )
    np.clip(v, -state.v_max, state.v_max, out=v)
    x = state.positions + v
    np.clip(x, state.lo, state.hi, out=x)
    state.velocities = v
    state.positions = x


def step(
    state: SwarmState,
    fitness: Callable[[np.ndarray], float],
    cfg: SwarmConfig,
    rng: np.random.Generator,
) -> SwarmState:
    """One full generation: evaluate all particles, update bests, advance.

    Personal and global bests update only on strict improvement (ties keep
    the incumbent).  Mutates and returns the given state.
    """
    _evaluate(state, fitness, cfg)
    state.generation += 1
    state.history.append((state.generation, state.gbest_fitness, state.total_evaluations))
    _advance(state, cfg, rng)
    return state


def run(
    cfg: SwarmConfig,
    dim: int,
    fitness: Callable[[np.ndarray], float],
    rng: np.random.Generator | None = None,
) -> RunResult:
    """Minimize fitness for at most cfg.iterations generations.

    With early_stop_threshold set, the run stops right after any
    generation whose global best fitness is below it; with
    stop_within_generation also set, it aborts mid-generation on the
    first sub-threshold evaluation (the aborted generation then shows up
    as a partial history row and partial evaluation count).
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    state = init_swarm(cfg, dim, rng)
    stopped_early = False
    abort_below = cfg.early_stop_threshold if cfg.stop_within_generation else None
    for _ in range(cfg.iterations):
        if _evaluate(state, fitness, cfg, abort_below):
            state.history.append((state.generation + 1, state.gbest_fitness, state.total_evaluations))
            stopped_early = True
            break
        state.generation += 1
        state.history.append((state.generation, state.gbest_fitness, state.total_evaluations))
        if cfg.early_stop_threshold is not None and state.gbest_fitness < cfg.early_stop_threshold:
            stopped_early = True
            break
        _advance(state, cfg, rng)
    return RunResult(
        best_position=state.gbest_position.copy(),
        best_fitness=state.gbest_fitness,
        evaluations=state.total_evaluations,
        stopped_early=stopped_early,
        history=list(state.history),
        nan_count=state.nan_count,
    )


def write_trajectory_csv(history: list[tuple[int, float, int]], path: str | Path) -> None:
    """Dump a run's history as CSV: generation, best_fitness, evaluations."""
    lines = ["generation,best_fitness,evaluations"]
    for generation, best, evaluations in history:
        lines.append(f"{generation},{best!r},{evaluations}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
