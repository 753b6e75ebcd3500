"""patchforge: black-box cross-modal adversarial patch optimization.

Stage one shapes an irregular polygon cold patch against an infrared
detector; stage two colors a grid through that shape's mask against a
visible detector.  Both stages are derivative-free (particle swarm over
opaque confidence oracles) and robustified by averaging over random
image transforms.
"""

from .attack import AttackConfig, AttackOutcome, AttackTask, attack, stage_one, stage_two
from .colorgrid import ColorGrid, UnifiedPatch, color_at, render_grid
from .fusion import fuse_infrared, fuse_visible
from .geometry import (
    BoundingBox,
    GridCellVertex,
    PolygonPatch,
    clamp_to_cells,
    perimeter_cell_rect,
    polygon_area,
    rasterize_mask,
    spread_cells,
    to_normalized_vertices,
)
from .oracle import (
    Detection,
    DetectorOracle,
    RemoteOracle,
    ToyInfraredOracle,
    ToyVisibleOracle,
    target_confidence,
    toy_infrared_confidence,
    toy_visible_confidence,
)
from .pso import SwarmConfig, SwarmState
from .transforms import CompositeTransform, EotConfig, apply_transform, expected_confidence, sample_transforms

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackOutcome",
    "AttackTask",
    "BoundingBox",
    "ColorGrid",
    "CompositeTransform",
    "Detection",
    "DetectorOracle",
    "EotConfig",
    "GridCellVertex",
    "PolygonPatch",
    "RemoteOracle",
    "SwarmConfig",
    "SwarmState",
    "ToyInfraredOracle",
    "ToyVisibleOracle",
    "UnifiedPatch",
    "apply_transform",
    "attack",
    "clamp_to_cells",
    "color_at",
    "expected_confidence",
    "fuse_infrared",
    "fuse_visible",
    "perimeter_cell_rect",
    "polygon_area",
    "rasterize_mask",
    "render_grid",
    "sample_transforms",
    "spread_cells",
    "stage_one",
    "stage_two",
    "target_confidence",
    "to_normalized_vertices",
    "toy_infrared_confidence",
    "toy_visible_confidence",
]
