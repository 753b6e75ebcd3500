"""Two-stage black-box attack: shape against infrared, colors against visible.

Stage one searches polygon vertex offsets so the cold patch drives the
infrared detector's confidence under the threshold; stage two freezes
that shape as a mask and searches the color grid against the visible
detector.  Both stages minimize the transform-averaged confidence with
the particle swarm, stopping early once they cross the threshold.
Final confidences are re-measured on an independent transform sample so
success is not an artifact of the optimization draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .colorgrid import ColorGrid, UnifiedPatch, unified_patch_from_dict, unified_patch_to_dict
from .fusion import fuse_infrared, fuse_visible, require_infrared, require_visible
from .geometry import BoundingBox, PolygonPatch, patch_from_dict, patch_to_dict, clamp_to_cells, spread_cells
from .oracle import DetectorOracle
from .pso import SwarmConfig, run as pso_run
from .transforms import EotConfig, expected_confidence, sample_transforms

DEFAULT_DELTA = 0.5


@dataclass
class AttackTask:
    """One registered visible/infrared image pair with a shared target box."""

    visible_image: np.ndarray
    infrared_image: np.ndarray
    box: BoundingBox
    class_label: str
    delta: float = DEFAULT_DELTA
    task_id: str = ""

    def __post_init__(self) -> None:
        require_visible(self.visible_image)
        require_infrared(self.infrared_image)
        for img in (self.visible_image, self.infrared_image):
            h, w = img.shape[:2]
            if not self.box.fits_inside(w, h):
                raise ValueError(f"box {self.box.as_list()} does not fit inside a {w}x{h} image")
        # Upper bound inclusive so the threshold edge delta = 1.0 (every
        # sub-certain detection counts as success) stays expressible.
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")


@dataclass
class AttackConfig:
    """Pipeline settings shared by both stages.

    The swarm config here carries the hyperparameters only; each stage
    gets its own copy with bounds [0, 1], the task's threshold as early
    stop, and a derived seed.  stop_within_generation defaults on for the
    pipeline: black-box queries are the cost unit, so the stage ends at
    the first sub-threshold evaluation.
    """

    n_vertices: int = 8
    grid_k: int = 18
    cold_intensity: float = 0.1
    eval_n_samples: int = 20
    stop_within_generation: bool = True
    seed: int = 0
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    eot: EotConfig = field(default_factory=EotConfig)


@dataclass
class StageResult:
    best_fitness: float
    queries: int
    history: list[tuple[int, float, int]]
    stopped_early: bool
    shape: PolygonPatch | None = None
    grid: ColorGrid | None = None


@dataclass
class AttackOutcome:
    patch: UnifiedPatch
    infrared_final_confidence: float
    visible_final_confidence: float
    success_infrared: bool
    success_visible: bool
    success_cross: bool
    queries_infrared: int
    queries_visible: int
    fitness_history: dict
    stage_one: StageResult
    stage_two: StageResult

    def to_dict(self) -> dict:
        return {
            "patch": unified_patch_to_dict(self.patch),
            "infrared_final_confidence": self.infrared_final_confidence,
            "visible_final_confidence": self.visible_final_confidence,
            "success_infrared": self.success_infrared,
            "success_visible": self.success_visible,
            "success_cross": self.success_cross,
            "queries_infrared": self.queries_infrared,
            "queries_visible": self.queries_visible,
            "fitness_history": self.fitness_history,
            "stages": {
                "shape_stage": {
                    "best_fitness": self.stage_one.best_fitness,
                    "queries": self.stage_one.queries,
                    "stopped_early": self.stage_one.stopped_early,
                    "shape": patch_to_dict(self.stage_one.shape),
                },
                "color_stage": {
                    "best_fitness": self.stage_two.best_fitness,
                    "queries": self.stage_two.queries,
                    "stopped_early": self.stage_two.stopped_early,
                    "grid_k": self.stage_two.grid.k,
                },
            },
        }

    @staticmethod
    def from_dict(data: dict) -> "AttackOutcome":
        patch = unified_patch_from_dict(data["patch"])
        stages = data["stages"]
        stage_one = StageResult(
            best_fitness=stages["shape_stage"]["best_fitness"],
            queries=stages["shape_stage"]["queries"],
            history=[tuple(row) for row in data["fitness_history"]["shape_stage"]],
            stopped_early=stages["shape_stage"]["stopped_early"],
            shape=patch_from_dict(stages["shape_stage"]["shape"]),
        )
        stage_two = StageResult(
            best_fitness=stages["color_stage"]["best_fitness"],
            queries=stages["color_stage"]["queries"],
            history=[tuple(row) for row in data["fitness_history"]["color_stage"]],
            stopped_early=stages["color_stage"]["stopped_early"],
            grid=patch.grid,
        )
        return AttackOutcome(
            patch=patch,
            infrared_final_confidence=data["infrared_final_confidence"],
            visible_final_confidence=data["visible_final_confidence"],
            success_infrared=data["success_infrared"],
            success_visible=data["success_visible"],
            success_cross=data["success_cross"],
            queries_infrared=data["queries_infrared"],
            queries_visible=data["queries_visible"],
            fitness_history=data["fitness_history"],
            stage_one=stage_one,
            stage_two=stage_two,
        )


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent 64-bit child seeds, stable for a given (seed, count)."""
    root = np.random.SeedSequence(seed)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in root.spawn(count)]


def stage_one(
    task: AttackTask,
    infrared_oracle: DetectorOracle,
    swarm_cfg: SwarmConfig,
    eot_cfg: EotConfig,
    n_vertices: int = 8,
    cold_intensity: float = 0.1,
) -> StageResult:
    """Optimize the polygon shape against the infrared oracle.

    Fitness of a raw offset vector is the transform-averaged confidence
    of the cold-fused image; one transform sample set (seeded from
    eot_cfg) is shared by every evaluation so the objective is fixed.
    """
    cells = spread_cells(n_vertices)
    transforms = sample_transforms(eot_cfg, np.random.default_rng(eot_cfg.seed))

    def fitness(raw: np.ndarray) -> float:
        shape = clamp_to_cells(raw, cells)
        return expected_confidence(
            infrared_oracle,
            lambda: fuse_infrared(task.infrared_image, task.box, shape, cold_intensity),
            transforms,
            task.box,
            task.class_label,
        )

    before = infrared_oracle.query_count
    result = pso_run(swarm_cfg, 2 * n_vertices, fitness)
    return StageResult(
        best_fitness=result.best_fitness,
        queries=infrared_oracle.query_count - before,
        history=result.history,
        stopped_early=result.stopped_early,
        shape=clamp_to_cells(result.best_position, cells),
    )


def stage_two(
    task: AttackTask,
    visible_oracle: DetectorOracle,
    best_shape: PolygonPatch,
    swarm_cfg: SwarmConfig,
    eot_cfg: EotConfig,
    grid_k: int = 18,
) -> StageResult:
    """Optimize the color grid against the visible oracle; the shape is frozen.

    The raw vector is the row-major grid flattened to (r, g, b) triples;
    search dimension is 3 * k^2.
    """
    if grid_k < 1:
        raise ValueError(f"grid dimension must be >= 1, got {grid_k}")
    transforms = sample_transforms(eot_cfg, np.random.default_rng(eot_cfg.seed))

    def make_grid(raw: np.ndarray) -> ColorGrid:
        return ColorGrid(grid_k, np.clip(raw, 0.0, 1.0).reshape(grid_k * grid_k, 3))

    def fitness(raw: np.ndarray) -> float:
        patch = UnifiedPatch(best_shape, make_grid(raw))
        return expected_confidence(
            visible_oracle,
            lambda: fuse_visible(task.visible_image, task.box, patch),
            transforms,
            task.box,
            task.class_label,
        )

    before = visible_oracle.query_count
    result = pso_run(swarm_cfg, 3 * grid_k * grid_k, fitness)
    return StageResult(
        best_fitness=result.best_fitness,
        queries=visible_oracle.query_count - before,
        history=result.history,
        stopped_early=result.stopped_early,
        grid=make_grid(result.best_position),
    )


def attack(
    task: AttackTask,
    infrared_oracle: DetectorOracle,
    visible_oracle: DetectorOracle,
    cfg: AttackConfig,
) -> AttackOutcome:
    """Run both stages, then measure final success on fresh transform samples.

    Success per modality means the re-measured confidence is below the
    task threshold; cross success requires both.  queries_* mirror the
    oracle counters at return, so give each task fresh oracle instances.
    """
    s1_swarm, s1_eot, s2_swarm, s2_eot, eval_inf, eval_vis = derive_seeds(cfg.seed, 6)

    def stage_swarm(seed: int) -> SwarmConfig:
        return replace(
            cfg.swarm,
            bounds=(0.0, 1.0),
            seed=seed,
            early_stop_threshold=task.delta,
            stop_within_generation=cfg.stop_within_generation,
        )

    one = stage_one(
        task,
        infrared_oracle,
        stage_swarm(s1_swarm),
        replace(cfg.eot, seed=s1_eot),
        n_vertices=cfg.n_vertices,
        cold_intensity=cfg.cold_intensity,
    )
    two = stage_two(
        task,
        visible_oracle,
        one.shape,
        stage_swarm(s2_swarm),
        replace(cfg.eot, seed=s2_eot),
        grid_k=cfg.grid_k,
    )
    patch = UnifiedPatch(one.shape, two.grid)

    eval_cfg_inf = replace(cfg.eot, n_samples=cfg.eval_n_samples, seed=eval_inf)
    eval_cfg_vis = replace(cfg.eot, n_samples=cfg.eval_n_samples, seed=eval_vis)
    inf_conf = expected_confidence(
        infrared_oracle,
        lambda: fuse_infrared(task.infrared_image, task.box, patch.shape, cfg.cold_intensity),
        sample_transforms(eval_cfg_inf, np.random.default_rng(eval_cfg_inf.seed)),
        task.box,
        task.class_label,
    )
    vis_conf = expected_confidence(
        visible_oracle,
        lambda: fuse_visible(task.visible_image, task.box, patch),
        sample_transforms(eval_cfg_vis, np.random.default_rng(eval_cfg_vis.seed)),
        task.box,
        task.class_label,
    )

    success_infrared = inf_conf < task.delta
    success_visible = vis_conf < task.delta
    return AttackOutcome(
        patch=patch,
        infrared_final_confidence=inf_conf,
        visible_final_confidence=vis_conf,
        success_infrared=success_infrared,
        success_visible=success_visible,
        success_cross=success_infrared and success_visible,
        queries_infrared=infrared_oracle.query_count,
        queries_visible=visible_oracle.query_count,
        fitness_history={
            "shape_stage": [list(row) for row in one.history],
            "color_stage": [list(row) for row in two.history],
        },
        stage_one=one,
        stage_two=two,
    )
