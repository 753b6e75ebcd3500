"""Pinned synthetic car scene shared by the server tests.

Deterministic 320x240 registered pair: a car-shaped bright/reference-
colored body on backgrounds engineered to stay below the blob detector's
thresholds, so the body is the unique detected component.
"""

from __future__ import annotations

import io

import numpy as np
import pytest
from PIL import Image as PILImage

CAR_BOX = (96, 72, 128, 84)  # x, y, w, h
SCENE_W, SCENE_H = 320, 240
REFERENCE_COLOR = (0.2, 0.4, 0.8)


def car_scene(seed: int = 2024):
    """Return (visible, infrared) float arrays with the car at CAR_BOX."""
    rng = np.random.default_rng(seed)
    x, y, w, h = CAR_BOX
    # Visible background keeps its blue channel low, far from the car paint.
    visible = np.stack(
        [
            rng.uniform(0.45, 0.95, size=(SCENE_H, SCENE_W)),
            rng.uniform(0.45, 0.95, size=(SCENE_H, SCENE_W)),
            rng.uniform(0.0, 0.3, size=(SCENE_H, SCENE_W)),
        ],
        axis=-1,
    )
    visible[y : y + h, x : x + w] = REFERENCE_COLOR
    visible[y : y + h, x : x + w] += rng.uniform(-0.02, 0.02, size=(h, w, 3))
    visible = np.clip(visible, 0.0, 1.0)
    # Infrared background stays cold; the body is warm with mild texture.
    infrared = rng.uniform(0.0, 0.4, size=(SCENE_H, SCENE_W))
    infrared[y : y + h, x : x + w] = 0.85 + rng.uniform(-0.03, 0.03, size=(h, w))
    infrared = np.clip(infrared, 0.0, 1.0)
    return visible, infrared


def to_png_bytes(image: np.ndarray) -> bytes:
    arr = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture(scope="session")
def scene():
    return car_scene()
