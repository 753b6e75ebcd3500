"""Irregular polygon patches anchored to the outer ring of a 3x3 grid.

The patch shape is an n-gon (3 <= n <= 8) whose vertices each live inside
one of the eight perimeter cells of a 3x3 subdivision of the target
bounding box, visited in clockwise order.  Confining every vertex to its
own cell keeps the polygon simple, keeps vertices inside the box, and
keeps them out of the center cell.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

N_PERIMETER_CELLS = 8
MIN_VERTICES = 3
MAX_VERTICES = 8

# Largest allowed ring-step between consecutive chosen cells (cyclic).  At
# four or more steps an edge can swing past the grid center and cross
# another edge, so those configurations are rejected outright.  Within the
# limit, the evenly spread assignments produced by spread_cells (the family
# the optimizer searches) are provably simple: every non-adjacent edge pair
# is separated by an axis-aligned third-of-the-box strip or, for the n=6
# assignment, by the main diagonal half-planes.  Other hand-picked cell
# subsets inside the limit can still self-intersect in rare offset
# configurations; is_simple() tests for that, and rasterization resolves
# such polygons deterministically by the even-odd rule.
MAX_CELL_GAP = 3

# (row, col) of each perimeter cell, clockwise from the top-left corner:
# top row left-to-right, right column, bottom row right-to-left, left column.
_CELL_GRID_POS = (
    (0, 0), (0, 1), (0, 2),
    (1, 2),
    (2, 2), (2, 1), (2, 0),
    (1, 0),
)


class DegenerateMaskWarning(RuntimeWarning):
    """A polygon rasterized to an empty mask (zero area after quantization)."""


@dataclass(frozen=True)
class GridCellVertex:
    """One polygon vertex: a perimeter cell index plus a position inside it.

    Offsets are normalized to the cell, so any (offset_u, offset_v) in
    [0, 1]^2 stays inside the cell and therefore inside the bounding box.
    """

    cell_index: int
    offset_u: float
    offset_v: float

    def __post_init__(self) -> None:
        if not 0 <= self.cell_index < N_PERIMETER_CELLS:
            raise ValueError(f"cell_index must be in [0, 7], got {self.cell_index}")
        if not (0.0 <= self.offset_u <= 1.0 and 0.0 <= self.offset_v <= 1.0):
            raise ValueError(
                f"cell offsets must lie in [0, 1], got ({self.offset_u}, {self.offset_v})"
            )


@dataclass(frozen=True)
class PolygonPatch:
    """An n-gon with one vertex per perimeter cell, in clockwise cell order.

    Cell indices must be strictly increasing, and for four or more
    vertices no cyclic step between consecutive cells (including the wrap
    from last back to first) may exceed MAX_CELL_GAP.  Patches on the
    evenly spread assignments (spread_cells) are guaranteed simple;
    triangles are simple unconditionally.
    """

    vertices: tuple[GridCellVertex, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        n = len(self.vertices)
        if not MIN_VERTICES <= n <= MAX_VERTICES:
            raise ValueError(f"patch needs {MIN_VERTICES}..{MAX_VERTICES} vertices, got {n}")
        cells = [v.cell_index for v in self.vertices]
        if any(b <= a for a, b in zip(cells, cells[1:])):
            raise ValueError(f"cell indices must be strictly increasing, got {cells}")
        if n >= 4:
            gaps = [b - a for a, b in zip(cells, cells[1:])]
            gaps.append(cells[0] + N_PERIMETER_CELLS - cells[-1])
            if max(gaps) > MAX_CELL_GAP:
                raise ValueError(
                    f"consecutive cells may be at most {MAX_CELL_GAP} ring steps apart "
                    f"(cyclically) to keep the polygon simple, got cells {cells}"
                )

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def cells(self) -> tuple[int, ...]:
        return tuple(v.cell_index for v in self.vertices)


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-space box (x, y, w, h); must lie fully inside its host image."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box needs positive size, got w={self.w}, h={self.h}")

    def fits_inside(self, width: int, height: int) -> bool:
        return 0 <= self.x and 0 <= self.y and self.x + self.w <= width and self.y + self.h <= height

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


def perimeter_cell_rect(cell_index: int) -> tuple[float, float, float, float]:
    """Return (x0, y0, x1, y1) of a perimeter cell in the unit square."""
    if not 0 <= cell_index < N_PERIMETER_CELLS:
        raise ValueError(f"cell_index must be in [0, 7], got {cell_index}")
    row, col = _CELL_GRID_POS[cell_index]
    return (col / 3.0, row / 3.0, (col + 1) / 3.0, (row + 1) / 3.0)


def spread_cells(n_vertices: int) -> tuple[int, ...]:
    """Evenly spaced perimeter cells for an n-vertex patch.

    Vertex k is assigned cell round(k * 8 / n), which spreads fewer than
    eight vertices around the full perimeter ring instead of bunching them.
    """
    if not MIN_VERTICES <= n_vertices <= MAX_VERTICES:
        raise ValueError(f"vertex count must be in [{MIN_VERTICES}, {MAX_VERTICES}], got {n_vertices}")
    return tuple(round(k * N_PERIMETER_CELLS / n_vertices) for k in range(n_vertices))


def to_normalized_vertices(patch: PolygonPatch) -> np.ndarray:
    """Map cell-relative vertices to (x, y) points in the unit square.

    Output order equals vertex order; every point lies in [0, 1]^2 and
    outside the open center cell.
    """
    pts = np.empty((patch.n, 2), dtype=float)
    for i, v in enumerate(patch.vertices):
        x0, y0, _, _ = perimeter_cell_rect(v.cell_index)
        pts[i, 0] = x0 + v.offset_u / 3.0
        pts[i, 1] = y0 + v.offset_v / 3.0
    return pts


def polygon_area(patch: PolygonPatch) -> float:
    """Shoelace area of the normalized vertex polygon, in [0, 1]."""
    pts = to_normalized_vertices(patch)
    x = pts[:, 0]
    y = pts[:, 1]
    return float(abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) / 2.0)


def rasterize_mask(patch: PolygonPatch, width: int, height: int) -> np.ndarray:
    """Even-odd fill of the patch polygon over a width x height pixel grid.

    A pixel is set iff its center lies inside the polygon under the
    even-odd rule; boundary pixels resolve by the same crossing test on
    the pixel center, so identical inputs always give identical masks.
    A polygon that quantizes to zero set pixels yields an empty mask and
    a DegenerateMaskWarning, not an error: degenerate shapes are legal
    optimizer states.
    """
    if width < 1 or height < 1:
        raise ValueError(f"mask size must be at least 1x1, got {width}x{height}")
    verts = to_normalized_vertices(patch)
    px = (np.arange(width, dtype=float) + 0.5) / width
    py = ((np.arange(height, dtype=float) + 0.5) / height)[:, None]
    inside = np.zeros((height, width), dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if y1 == y2:
            continue  # horizontal edges never cross the +x ray
        crosses = (y1 > py) != (y2 > py)
        x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < x_at)
    if not inside.any():
        warnings.warn(
            "polygon rasterized to an empty mask", DegenerateMaskWarning, stacklevel=2
        )
    return inside


def clamp_to_cells(raw, cells: tuple[int, ...] | None = None) -> PolygonPatch:
    """Build a patch from a flat (u0, v0, u1, v1, ...) optimizer vector.

    Offsets are clamped componentwise into [0, 1]; vertex k keeps its
    pre-assigned perimeter cell (spread_cells(n) unless given), so no
    optimizer step can move a vertex out of the box or into the center.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size % 2 != 0:
        raise ValueError(f"raw vector must be flat with even length, got shape {raw.shape}")
    n = raw.size // 2
    if not MIN_VERTICES <= n <= MAX_VERTICES:
        raise ValueError(f"vertex count must be in [{MIN_VERTICES}, {MAX_VERTICES}], got {n}")
    if cells is None:
        cells = spread_cells(n)
    elif len(cells) != n:
        raise ValueError(f"{len(cells)} cells for {n} vertices")
    uv = np.clip(raw, 0.0, 1.0).reshape(n, 2)
    return PolygonPatch(
        tuple(
            GridCellVertex(cell, float(u), float(v))
            for cell, (u, v) in zip(cells, uv)
        )
    )


def _proper_intersection(p1, p2, p3, p4) -> bool:
    """Strictly-proper segment crossing: shared endpoints and touches do not count."""

    def orient(a, b, c) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple(patch: PolygonPatch) -> bool:
    """True when no two non-adjacent edges properly cross.

    Always true for spread_cells assignments; hand-picked cell subsets
    within the gap rule can rarely fail this, which rasterization then
    resolves deterministically by the even-odd rule.
    """
    pts = to_normalized_vertices(patch)
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _proper_intersection(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                return False
    return True


def round_sig9(x: float) -> float:
    """Quantize to 9 significant decimal digits; stable under re-serialization."""
    return float(f"{x:.9g}")


def patch_to_dict(patch: PolygonPatch) -> dict:
    """JSON-ready form: {"n": int, "cells": [int...], "offsets": [[u, v]...]}."""
    return {
        "n": patch.n,
        "cells": [v.cell_index for v in patch.vertices],
        "offsets": [[round_sig9(v.offset_u), round_sig9(v.offset_v)] for v in patch.vertices],
    }


def patch_from_dict(data: dict) -> PolygonPatch:
    cells = data["cells"]
    offsets = data["offsets"]
    if len(cells) != data["n"] or len(offsets) != data["n"]:
        raise ValueError("patch dict lengths disagree with declared vertex count")
    return PolygonPatch(
        tuple(
            GridCellVertex(int(c), float(u), float(v))
            for c, (u, v) in zip(cells, offsets)
        )
    )
