"""K x K color grid over the bounding box, and the unified shape+color patch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PolygonPatch, patch_from_dict, patch_to_dict, round_sig9


@dataclass(frozen=True, eq=False)
class ColorGrid:
    """Row-major k*k grid of RGB cells, every channel in [0, 1].

    Colors stay continuous floats during optimization; quantization to
    8-bit happens only at PNG export.
    """

    k: int
    colors: np.ndarray  # (k*k, 3)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"grid dimension must be >= 1, got {self.k}")
        colors = np.array(self.colors, dtype=float)
        if colors.shape != (self.k * self.k, 3):
            raise ValueError(
                f"expected {self.k * self.k} RGB triples, got array of shape {colors.shape}"
            )
        if colors.min() < 0.0 or colors.max() > 1.0:
            raise ValueError("color channels must lie in [0, 1]")
        colors.flags.writeable = False
        object.__setattr__(self, "colors", colors)


@dataclass(frozen=True, eq=False)
class UnifiedPatch:
    """The cross-modal patch: one polygon shape plus the color grid it masks."""

    shape: PolygonPatch
    grid: ColorGrid


def color_at(grid: ColorGrid, x: float, y: float) -> np.ndarray:
    """Nearest-cell color lookup for a normalized point; no interpolation.

    Points on the far boundary (x == 1 or y == 1) clamp to the last cell.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point must lie in the unit square, got ({x}, {y})")
    col = min(int(x * grid.k), grid.k - 1)
    row = min(int(y * grid.k), grid.k - 1)
    return grid.colors[row * grid.k + col].copy()


def render_grid(grid: ColorGrid, width: int, height: int) -> np.ndarray:
    """Render the grid into a (height, width, 3) image; blocky, no smoothing.

    Pixel (px, py) takes the color of the cell containing its center
    ((px + 0.5) / width, (py + 0.5) / height).
    """
    if width < 1 or height < 1:
        raise ValueError(f"image size must be at least 1x1, got {width}x{height}")
    cols = np.minimum(((np.arange(width) + 0.5) / width * grid.k).astype(int), grid.k - 1)
    rows = np.minimum(((np.arange(height) + 0.5) / height * grid.k).astype(int), grid.k - 1)
    return grid.colors[rows[:, None] * grid.k + cols[None, :]]


def grid_to_dict(grid: ColorGrid) -> dict:
    """JSON-ready form: {"k": int, "colors": [[r, g, b]...]}."""
    return {
        "k": grid.k,
        "colors": [[round_sig9(c) for c in rgb] for rgb in grid.colors],
    }


def grid_from_dict(data: dict) -> ColorGrid:
    return ColorGrid(int(data["k"]), np.asarray(data["colors"], dtype=float))


def unified_patch_to_dict(patch: UnifiedPatch) -> dict:
    return {"shape": patch_to_dict(patch.shape), "grid": grid_to_dict(patch.grid)}


def unified_patch_from_dict(data: dict) -> UnifiedPatch:
    return UnifiedPatch(patch_from_dict(data["shape"]), grid_from_dict(data["grid"]))
