"""Swarm minimizer contracts: updates, bests, clamping, early stopping."""

from __future__ import annotations

import math

import numpy as np
import pytest

from patchforge.pso import (
    FitnessError,
    R_MODE_FIXED,
    SwarmConfig,
    init_swarm,
    run,
    step,
    write_trajectory_csv,
)


def sphere(x: np.ndarray) -> float:
    return float(np.sum(x * x))


class TestInit:
    def test_single_particle_reproducible(self):
        cfg = SwarmConfig(population=1, bounds=(0.0, 1.0), seed=9)
        a = init_swarm(cfg, 2, np.random.default_rng(cfg.seed))
        b = init_swarm(cfg, 2, np.random.default_rng(cfg.seed))
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.velocities, b.velocities)

    def test_population_size_exact(self):
        cfg = SwarmConfig(population=100, bounds=(-1.0, 1.0))
        state = init_swarm(cfg, 4, np.random.default_rng(0))
        assert state.positions.shape == (100, 4)
        assert np.isinf(state.pbest_fitness).all()

    def test_degenerate_bounds_pin_positions(self):
        eps = 1e-9
        cfg = SwarmConfig(population=20, bounds=(0.5, 0.5 + eps))
        state = init_swarm(cfg, 3, np.random.default_rng(1))
        assert (np.abs(state.positions - 0.5) <= eps).all()

    def test_positions_within_bounds_velocities_capped(self):
        bounds = [(-2.0, 1.0), (0.0, 5.0), (-1.0, -0.5)]
        cfg = SwarmConfig(population=50, bounds=bounds)
        state = init_swarm(cfg, 3, np.random.default_rng(2))
        lo = np.array([-2.0, 0.0, -1.0])
        hi = np.array([1.0, 5.0, -0.5])
        assert (state.positions >= lo).all() and (state.positions <= hi).all()
        assert (np.abs(state.velocities) <= 0.5 * (hi - lo)).all()

    def test_bad_configs_rejected(self):
        with pytest.raises(ValueError):
            SwarmConfig(population=0)
        with pytest.raises(ValueError):
            SwarmConfig(r_mode="sometimes")
        with pytest.raises(ValueError):
            init_swarm(SwarmConfig(bounds=(1.0, 0.0)), 2, np.random.default_rng(0))


class TestStep:
    def test_zero_coefficients_freeze_positions(self):
        cfg = SwarmConfig(population=10, inertia=0.0, cognitive=0.0, social=0.0, bounds=(-1.0, 1.0), seed=3)
        rng = np.random.default_rng(cfg.seed)
        state = init_swarm(cfg, 3, rng)
        before = state.positions.copy()
        step(state, sphere, cfg, rng)
        assert (state.velocities == 0.0).all()
        assert np.array_equal(state.positions, before)

    def test_attraction_terms_vanish_at_shared_best(self):
        # One particle sitting at pbest = gbest = x: v' = inertia * v exactly,
        # even in stochastic mode, because both differences are exactly zero.
        # Bounds are wide and v_max small so no clamp can engage.
        cfg = SwarmConfig(population=1, inertia=0.7, bounds=(-1e6, 1e6), v_max=1.0, seed=5)
        rng = np.random.default_rng(cfg.seed)
        state = init_swarm(cfg, 4, rng)
        v_before = state.velocities.copy()
        x_before = state.positions.copy()
        step(state, sphere, cfg, rng)
        assert np.array_equal(state.velocities, 0.7 * v_before)
        assert np.array_equal(state.positions, x_before + 0.7 * v_before)

    def test_fixed_r_zero_coefficients_reduce_to_inertia_only(self):
        # Acceptance check: with fixed r and c1 = c2 = 0, one step changes
        # each position by exactly inertia * velocity (bit-level).
        cfg = SwarmConfig(
            population=8, inertia=0.9, cognitive=0.0, social=0.0,
            r_mode=R_MODE_FIXED, bounds=(-1e6, 1e6), v_max=1.0, seed=21,
        )
        rng = np.random.default_rng(cfg.seed)
        state = init_swarm(cfg, 5, rng)
        v_before = state.velocities.copy()
        x_before = state.positions.copy()
        step(state, sphere, cfg, rng)
        assert np.array_equal(state.velocities, 0.9 * v_before)
        assert np.array_equal(state.positions, x_before + 0.9 * v_before)

    def test_fixed_r_velocity_update_matches_hand_computation(self):
        cfg = SwarmConfig(
            population=3, inertia=0.9, cognitive=1.6, social=1.4,
            r_mode=R_MODE_FIXED, r1=0.5, r2=0.5, bounds=(-1e6, 1e6), v_max=1e7, seed=17,
        )
        rng = np.random.default_rng(cfg.seed)
        state = init_swarm(cfg, 2, rng)
        x = state.positions.copy()
        v = state.velocities.copy()
        step(state, sphere, cfg, rng)
        # After the first evaluation pbest == x, so the cognitive term is zero;
        # gbest is the best-evaluated particle's position.  The hand
        # computation applies the same velocity cap and bound clamps.
        gbest = x[np.argmin([sphere(p) for p in x])]
        expected_v = np.clip(0.9 * v + 1.6 * 0.5 * (x - x) + 1.4 * 0.5 * (gbest - x), -1e7, 1e7)
        expected_x = np.clip(x + expected_v, -1e6, 1e6)
        assert np.array_equal(state.velocities, expected_v)
        assert np.array_equal(state.positions, expected_x)

    def test_nan_fitness_counts_as_infinity(self):
        calls = {"n": 0}

        def sometimes_nan(x: np.ndarray) -> float:
            calls["n"] += 1
            return math.nan if calls["n"] % 2 else sphere(x)

        cfg = SwarmConfig(population=6, bounds=(-1.0, 1.0), seed=8)
        rng = np.random.default_rng(cfg.seed)
        state = init_swarm(cfg, 2, rng)
        step(state, sometimes_nan, cfg, rng)
        assert state.nan_count == 3
        assert np.isfinite(state.gbest_fitness)

    def test_positions_and_velocities_clamped_after_every_step(self):
        cfg = SwarmConfig(population=30, inertia=1.0, cognitive=2.5, social=2.5, bounds=(-0.5, 0.5), v_max=0.3, seed=6)
        rng = np.random.default_rng(cfg.seed)
        state = init_swarm(cfg, 4, rng)
        for _ in range(10):
            step(state, sphere, cfg, rng)
            assert (state.positions >= -0.5).all() and (state.positions <= 0.5).all()
            assert (np.abs(state.velocities) <= 0.3).all()

    def test_evaluation_count_accumulates_by_population(self):
        cfg = SwarmConfig(population=13, bounds=(-1.0, 1.0), seed=2)
        rng = np.random.default_rng(cfg.seed)
        state = init_swarm(cfg, 2, rng)
        for gen in range(1, 4):
            step(state, sphere, cfg, rng)
            assert state.total_evaluations == 13 * gen
            assert state.generation == gen


class TestRun:
    def test_constant_zero_fitness_stops_after_one_generation(self):
        cfg = SwarmConfig(population=17, iterations=10, bounds=(0.0, 1.0), early_stop_threshold=0.5, seed=4)
        result = run(cfg, 3, lambda x: 0.0)
        assert result.stopped_early
        assert result.evaluations == 17
        assert result.history[-1][0] == 1

    def test_no_threshold_uses_full_budget(self):
        cfg = SwarmConfig(population=9, iterations=7, bounds=(-1.0, 1.0), seed=10)
        result = run(cfg, 2, sphere)
        assert not result.stopped_early
        assert result.evaluations == 9 * 7

    def test_sphere_history_non_increasing_and_improving(self):
        cfg = SwarmConfig(population=100, iterations=10, bounds=(-1.0, 1.0), seed=0)
        result = run(cfg, 8, sphere)
        bests = [row[1] for row in result.history]
        assert len(bests) == 10
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))
        assert bests[-1] < bests[0]

    def test_sphere_early_stop_fires_under_default_hyperparameters(self):
        cfg = SwarmConfig(population=100, iterations=10, bounds=(-1.0, 1.0), early_stop_threshold=0.5, seed=1)
        result = run(cfg, 8, sphere)
        assert result.stopped_early
        assert result.best_fitness < 0.5
        assert result.evaluations == 100 * result.history[-1][0]

    def test_mid_generation_abort_counts_partial_evaluations(self):
        cfg = SwarmConfig(
            population=25, iterations=10, bounds=(0.0, 1.0),
            early_stop_threshold=0.5, stop_within_generation=True, seed=12,
        )
        result = run(cfg, 2, lambda x: 0.0)
        assert result.stopped_early
        assert result.evaluations == 1  # first evaluation already under threshold
        assert result.best_fitness == 0.0

    def test_identical_seeds_identical_trajectories(self):
        cfg = SwarmConfig(population=40, iterations=5, bounds=(-2.0, 2.0), seed=33)
        a = run(cfg, 6, sphere)
        b = run(cfg, 6, sphere)
        assert a.history == b.history
        assert np.array_equal(a.best_position, b.best_position)

    def test_fitness_errors_carry_partial_count(self):
        calls = {"n": 0}

        def flaky(x: np.ndarray) -> float:
            calls["n"] += 1
            if calls["n"] == 5:
                raise RuntimeError("oracle went away")
            return sphere(x)

        cfg = SwarmConfig(population=10, iterations=3, bounds=(-1.0, 1.0), seed=14)
        with pytest.raises(FitnessError) as err:
            run(cfg, 2, flaky)
        assert err.value.evaluations == 4

    def test_trajectory_csv(self, tmp_path):
        cfg = SwarmConfig(population=5, iterations=3, bounds=(-1.0, 1.0), seed=15)
        result = run(cfg, 2, sphere)
        path = tmp_path / "trajectory.csv"
        write_trajectory_csv(result.history, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "generation,best_fitness,evaluations"
        assert len(lines) == 4
