"""Composite the patch into the target box of visible / infrared images.

Images are numpy float arrays in [0, 1]: (h, w) for infrared (grayscale),
(h, w, 3) for visible (RGB).  Compositing is replacement, not blending:
a physical sticker fully occludes the surface behind it.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .colorgrid import UnifiedPatch, render_grid
from .geometry import BoundingBox, PolygonPatch, rasterize_mask

DEFAULT_COLD_INTENSITY = 0.1

MODALITY_VISIBLE = "visible"
MODALITY_INFRARED = "infrared"


class ModalityError(ValueError):
    """Image shape does not match the declared modality."""


def require_infrared(image: np.ndarray) -> None:
    if not (isinstance(image, np.ndarray) and image.ndim == 2):
        raise ModalityError(
            f"infrared image must be a 2-d grayscale array, got shape {getattr(image, 'shape', None)}"
        )


def require_visible(image: np.ndarray) -> None:
    if not (isinstance(image, np.ndarray) and image.ndim == 3 and image.shape[2] == 3):
        raise ModalityError(
            f"visible image must be an (h, w, 3) RGB array, got shape {getattr(image, 'shape', None)}"
        )


def _check_box(image: np.ndarray, box: BoundingBox) -> None:
    h, w = image.shape[:2]
    if not box.fits_inside(w, h):
        raise ValueError(f"box {box.as_list()} does not fit inside a {w}x{h} image")


def fuse_infrared(
    image: np.ndarray,
    box: BoundingBox,
    shape: PolygonPatch,
    cold_intensity: float = DEFAULT_COLD_INTENSITY,
) -> np.ndarray:
    """Stamp the cold patch: masked pixels in the box become cold_intensity.

    Every pixel outside the mask (and everything outside the box) is
    bit-identical to the input.  The input array is never mutated.
    """
    require_infrared(image)
    _check_box(image, box)
    if not 0.0 <= cold_intensity <= 1.0:
        raise ValueError(f"cold intensity must lie in [0, 1], got {cold_intensity}")
    mask = rasterize_mask(shape, box.w, box.h)
    out = image.copy()
    region = out[box.y : box.y + box.h, box.x : box.x + box.w]
    region[mask] = cold_intensity
    return out


def fuse_visible(image: np.ndarray, box: BoundingBox, patch: UnifiedPatch) -> np.ndarray:
    """Stamp the color patch: masked pixels take their grid-cell color.

    Uses the same rasterized mask as fuse_infrared, so the changed-pixel
    sets of the two modalities are identical for a shared shape.
    """
    require_visible(image)
    _check_box(image, box)
    mask = rasterize_mask(patch.shape, box.w, box.h)
    grid_img = render_grid(patch.grid, box.w, box.h)
    out = image.copy()
    region = out[box.y : box.y + box.h, box.x : box.x + box.w]
    region[mask] = grid_img[mask]
    return out


def load_png(path: str | Path, modality: str) -> np.ndarray:
    """Load an 8-bit PNG as floats in [0, 1].

    Infrared accepts single-channel PNGs or RGB(A) PNGs whose channels are
    replicated grayscale; anything else is a modality mismatch.
    """
    img = PILImage.open(path)
    if modality == MODALITY_INFRARED:
        if img.mode in ("RGB", "RGBA"):
            arr = np.asarray(img.convert("RGB"))
            if not (arr[..., 0] == arr[..., 1]).all() or not (arr[..., 1] == arr[..., 2]).all():
                raise ModalityError(f"{path}: RGB channels differ; not a replicated grayscale image")
            arr = arr[..., 0]
        else:
            arr = np.asarray(img.convert("L"))
        return arr.astype(float) / 255.0
    if modality == MODALITY_VISIBLE:
        return np.asarray(img.convert("RGB")).astype(float) / 255.0
    raise ValueError(f"unknown modality {modality!r}")


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)


def save_png(path: str | Path, image: np.ndarray) -> None:
    """Write a float image as an 8-bit PNG (grayscale, RGB, or RGBA)."""
    arr = to_uint8(image)
    if arr.ndim == 2:
        mode = "L"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        mode = "RGB"
    elif arr.ndim == 3 and arr.shape[2] == 4:
        mode = "RGBA"
    else:
        raise ValueError(f"cannot encode array of shape {arr.shape} as PNG")
    PILImage.fromarray(arr, mode=mode).save(path, format="PNG")


def encode_png_bytes(image: np.ndarray, modality: str) -> bytes:
    """Encode a float image to PNG bytes for the detector wire protocol."""
    if modality == MODALITY_INFRARED:
        require_infrared(image)
        mode = "L"
    elif modality == MODALITY_VISIBLE:
        require_visible(image)
        mode = "RGB"
    else:
        raise ValueError(f"unknown modality {modality!r}")
    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(image), mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def export_patch_rgba(patch: UnifiedPatch, width: int, height: int) -> np.ndarray:
    """Printable realization of the patch: RGB from the grid, mask as alpha."""
    rgb = render_grid(patch.grid, width, height)
    mask = rasterize_mask(patch.shape, width, height)
    out = np.zeros((height, width, 4), dtype=float)
    out[..., :3] = rgb
    out[..., 3] = mask.astype(float)
    return out
