"""Shared fixtures: reference shapes, random patch factories, demo tasks."""

from __future__ import annotations

import numpy as np
import pytest

from patchforge.geometry import GridCellVertex, PolygonPatch

# Per-cell offsets that land every vertex on the bounding-box outline:
# four corners plus four edge midpoints.
_FULL_SQUARE_OFFSETS = (
    (0.0, 0.0), (0.5, 0.0), (1.0, 0.0),
    (1.0, 0.5),
    (1.0, 1.0), (0.5, 1.0), (0.0, 1.0),
    (0.0, 0.5),
)


def full_square_octagon() -> PolygonPatch:
    """Octagon equal to the whole bounding box (area exactly 1)."""
    return PolygonPatch(
        tuple(GridCellVertex(i, u, v) for i, (u, v) in enumerate(_FULL_SQUARE_OFFSETS))
    )


def cell_center_octagon() -> PolygonPatch:
    """All eight vertices at their cell centers; the square [1/6, 5/6]^2,
    shoelace area 4/9."""
    return PolygonPatch(tuple(GridCellVertex(i, 0.5, 0.5) for i in range(8)))


def random_patch(rng: np.random.Generator, n: int | None = None) -> PolygonPatch:
    """Random patch from the family the optimizer searches: evenly spread
    cells for the drawn vertex count, uniform offsets."""
    from patchforge.geometry import spread_cells

    if n is None:
        n = int(rng.integers(3, 9))
    return PolygonPatch(
        tuple(
            GridCellVertex(int(c), float(rng.uniform()), float(rng.uniform()))
            for c in spread_cells(n)
        )
    )


def shoelace(points: np.ndarray) -> float:
    """Independent polygon-area oracle used to check the implementation."""
    x = points[:, 0]
    y = points[:, 1]
    return float(abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) / 2.0)


TOY_REFERENCE_COLOR = (0.2, 0.4, 0.8)
TOY_INFRARED_BODY = 0.8


def toy_task(rng: np.random.Generator, width: int = 96, height: int = 80, delta: float = 0.5):
    """In-memory demo-style task: noise backgrounds, uniform vehicle box."""
    from patchforge.attack import AttackTask
    from patchforge.geometry import BoundingBox

    w = int(rng.integers(44, 57))
    h = int(rng.integers(36, 47))
    x = int(rng.integers(4, width - w - 4 + 1))
    y = int(rng.integers(4, height - h - 4 + 1))
    visible = rng.uniform(0.0, 1.0, size=(height, width, 3))
    visible[y : y + h, x : x + w] = TOY_REFERENCE_COLOR
    infrared = rng.uniform(0.0, 1.0, size=(height, width))
    infrared[y : y + h, x : x + w] = TOY_INFRARED_BODY
    return AttackTask(
        visible_image=visible,
        infrared_image=infrared,
        box=BoundingBox(x, y, w, h),
        class_label="car",
        delta=delta,
        task_id="toy",
    )


def toy_oracles(task):
    from patchforge.oracle import ToyInfraredOracle, ToyVisibleOracle

    return (
        ToyInfraredOracle(task.box, class_label=task.class_label),
        ToyVisibleOracle(task.box, reference_color=TOY_REFERENCE_COLOR, class_label=task.class_label),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
