"""Random image transforms for physical robustness, and their expectation.

Each sampled transform is a composite of three stages applied in order:
downsample-then-upsample (camera resolution loss), additive brightness
with clamping (illumination), and a view warp combining rotation,
translation and scaling (pose).  The attack objective averages detector
confidence over a set of sampled transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox
from .oracle import DetectorOracle, target_confidence


@dataclass(frozen=True)
class ViewTransform:
    """Rotation (degrees) about the image center, translation as a fraction
    of image size, and scaling about the center."""

    angle_deg: float
    translate_x: float
    translate_y: float
    scale: float

    @property
    def is_identity(self) -> bool:
        return (
            self.angle_deg == 0.0
            and self.translate_x == 0.0
            and self.translate_y == 0.0
            and self.scale == 1.0
        )


@dataclass(frozen=True)
class BrightnessTransform:
    delta: float

    @property
    def is_identity(self) -> bool:
        return self.delta == 0.0


@dataclass(frozen=True)
class DownsampleTransform:
    factor: float  # in (0, 1]

    @property
    def is_identity(self) -> bool:
        return self.factor == 1.0


@dataclass(frozen=True)
class CompositeTransform:
    view: ViewTransform
    brightness: BrightnessTransform
    downsample: DownsampleTransform


def identity_transform() -> CompositeTransform:
    return CompositeTransform(
        ViewTransform(0.0, 0.0, 0.0, 1.0), BrightnessTransform(0.0), DownsampleTransform(1.0)
    )


@dataclass(frozen=True)
class EotConfig:
    """Sampling ranges for the transform distribution.

    rotation_deg, translation and brightness_delta are half-widths of
    symmetric ranges; scale_range and downsample_range are (lo, hi).
    n_samples Monte Carlo draws approximate the expectation; the default
    is small during optimization to keep query cost down, with a larger
    independent set used for final measurement.
    """

    n_samples: int = 5
    rotation_deg: float = 10.0
    translation: float = 0.05
    scale_range: tuple[float, float] = (0.9, 1.1)
    brightness_delta: float = 0.15
    downsample_range: tuple[float, float] = (0.5, 1.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.rotation_deg < 0 or self.translation < 0 or self.brightness_delta < 0:
            raise ValueError("range half-widths must be non-negative")
        if self.scale_range[0] > self.scale_range[1] or self.scale_range[0] <= 0:
            raise ValueError(f"bad scale range {self.scale_range}")
        lo, hi = self.downsample_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"downsample range must satisfy 0 < lo <= hi <= 1, got {self.downsample_range}")


def collapsed_eot(n_samples: int = 5, seed: int = 0) -> EotConfig:
    """All ranges collapsed to identity values: n identical no-op transforms."""
    return EotConfig(
        n_samples=n_samples,
        rotation_deg=0.0,
        translation=0.0,
        scale_range=(1.0, 1.0),
        brightness_delta=0.0,
        downsample_range=(1.0, 1.0),
        seed=seed,
    )


def sample_transforms(cfg: EotConfig, rng: np.random.Generator) -> list[CompositeTransform]:
    """Draw n_samples composite transforms, uniform within each range.

    The per-sample draw order is fixed (angle, tx, ty, scale, delta,
    factor), so a given seed always yields the same transform list.
    """
    out = []
    for _ in range(cfg.n_samples):
        angle = float(rng.uniform(-cfg.rotation_deg, cfg.rotation_deg))
        tx = float(rng.uniform(-cfg.translation, cfg.translation))
        ty = float(rng.uniform(-cfg.translation, cfg.translation))
        scale = float(rng.uniform(cfg.scale_range[0], cfg.scale_range[1]))
        delta = float(rng.uniform(-cfg.brightness_delta, cfg.brightness_delta))
        factor = float(rng.uniform(cfg.downsample_range[0], cfg.downsample_range[1]))
        out.append(
            CompositeTransform(
                ViewTransform(angle, tx, ty, scale),
                BrightnessTransform(delta),
                DownsampleTransform(factor),
            )
        )
    return out


def _bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample image at float coordinates with edge-pixel padding.

    Uses the lerp form a + t * (b - a), which reproduces constant regions
    exactly and keeps every output inside the input value range.
    """
    h, w = image.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = xs.astype(int)
    y0 = ys.astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if image.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    tl = image[y0, x0]
    tr = image[y0, x1]
    bl = image[y1, x0]
    br = image[y1, x1]
    top = tl + fx * (tr - tl)
    bottom = bl + fx * (br - bl)
    return top + fy * (bottom - top)


def _resize_bilinear(image: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    h, w = image.shape[:2]
    ys = (np.arange(new_h, dtype=float) + 0.5) * h / new_h - 0.5
    xs = (np.arange(new_w, dtype=float) + 0.5) * w / new_w - 0.5
    return _bilinear_sample(image, xs[None, :].repeat(new_h, axis=0), ys[:, None].repeat(new_w, axis=1))


def _apply_view(image: np.ndarray, view: ViewTransform) -> np.ndarray:
    h, w = image.shape[:2]
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    theta = math.radians(view.angle_deg)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    xo, yo = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    # Invert p_out = s * R(theta) (p_src - c) + c + t to find the source pixel.
    dx = xo - cx - view.translate_x * w
    dy = yo - cy - view.translate_y * h
    xs = (cos_t * dx + sin_t * dy) / view.scale + cx
    ys = (-sin_t * dx + cos_t * dy) / view.scale + cy
    return _bilinear_sample(image, xs, ys)


def _apply_downsample(image: np.ndarray, factor: float) -> np.ndarray:
    h, w = image.shape[:2]
    new_h = max(1, round(h * factor))
    new_w = max(1, round(w * factor))
    if new_h == h and new_w == w:
        return image
    return _resize_bilinear(_resize_bilinear(image, new_h, new_w), h, w)


def apply_transform(t: CompositeTransform, image: np.ndarray) -> np.ndarray:
    """Apply one composite transform; output has the input's dimensions.

    Identity stages are skipped outright, so a fully-identity composite
    returns the input bit-for-bit.
    """
    out = image
    if not t.downsample.is_identity:
        out = _apply_downsample(out, t.downsample.factor)
    if not t.brightness.is_identity:
        out = np.clip(out + t.brightness.delta, 0.0, 1.0)
    if not t.view.is_identity:
        out = _apply_view(out, t.view)
    return out


def expected_confidence(
    oracle: DetectorOracle,
    make_adv,
    transforms: list[CompositeTransform],
    target: BoundingBox,
    class_label: str,
) -> float:
    """Mean detector confidence for the target over the transform list.

    make_adv is a pure producer of the fused adversarial image; each
    transform costs exactly one oracle query, so a failure part-way
    through leaves the oracle's query counter at the number of completed
    queries.
    """
    if not transforms:
        raise ValueError("transform list must be non-empty")
    adv = make_adv()
    total = 0.0
    for t in transforms:
        total += target_confidence(oracle, apply_transform(t, adv), target, class_label)
    return total / len(transforms)
