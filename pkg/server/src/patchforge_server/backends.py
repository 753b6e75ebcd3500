"""Detection backends: an analytic blob detector and a torchvision wrapper.

A backend consumes a decoded float image ((h, w) for infrared, (h, w, 3)
for visible, values in [0, 1]) and returns detection dicts in wire form:
{"class": str, "confidence": float, "bbox": [x, y, w, h]}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

CONFIDENCE_FLOOR = 0.01
MODEL_INPUT_SIZE = 416  # detector models are fed square inputs at this size

# Bright-vehicle scenes for the analytic backend: the car body reads warm in
# the infrared channel and close to this paint color in the visible one.
TOY_REFERENCE_COLOR = (0.2, 0.4, 0.8)
TOY_WARM_THRESHOLD = 0.5
TOY_COLOR_TOLERANCE = 0.3
TOY_MIN_AREA = 64


@dataclass
class ToyBlobBackend:
    """Deterministic connected-component detector for synthetic scenes.

    Foreground pixels (warm in infrared, near the reference color in
    visible) are grouped 8-connected; each blob of at least min_area
    pixels becomes one detection whose confidence is the blob's fill
    ratio inside its own bounding box.  Stateless and dependency-light,
    which makes it the default oracle for protocol and loopback tests.
    """

    class_label: str = "car"
    warm_threshold: float = TOY_WARM_THRESHOLD
    reference_color: tuple[float, float, float] = TOY_REFERENCE_COLOR
    color_tolerance: float = TOY_COLOR_TOLERANCE
    min_area: int = TOY_MIN_AREA
    confidence_floor: float = CONFIDENCE_FLOOR

    name = "toy-blob"

    def detect(self, image: np.ndarray, modality: str) -> list[dict]:
        if modality == "infrared":
            foreground = image > self.warm_threshold
        else:
            dist = np.linalg.norm(image - np.asarray(self.reference_color), axis=-1)
            foreground = dist < self.color_tolerance
        labels, count = ndimage.label(foreground, structure=np.ones((3, 3), dtype=int))
        detections = []
        for index in range(1, count + 1):
            component = labels == index
            area = int(component.sum())
            if area < self.min_area:
                continue
            rows = np.any(component, axis=1)
            cols = np.any(component, axis=0)
            y0, y1 = np.where(rows)[0][[0, -1]]
            x0, x1 = np.where(cols)[0][[0, -1]]
            w = int(x1 - x0 + 1)
            h = int(y1 - y0 + 1)
            confidence = min(1.0, area / (w * h))
            if confidence < self.confidence_floor:
                continue
            detections.append(
                {
                    "class": self.class_label,
                    "confidence": float(confidence),
                    "bbox": [int(x0), int(y0), w, h],
                }
            )
        detections.sort(key=lambda d: (-d["confidence"], d["bbox"]))
        return detections


class TorchvisionBackend:
    """Pretrained torchvision detection model behind the wire protocol.

    The image is resized to the model input size, single-channel inputs
    are replicated to three channels, and output boxes are mapped back to
    the original pixel grid.  Loading requires the pretrained weights to
    be available locally (torch hub cache); there is no download fallback.
    """

    def __init__(self, model_name: str, confidence_floor: float = CONFIDENCE_FLOOR):
        try:
            import torch
            from torchvision import models
        except ImportError as exc:
            raise RuntimeError(
                "torchvision backend requested but torch/torchvision are not installed"
            ) from exc
        factory = getattr(models.detection, model_name, None)
        if factory is None:
            raise RuntimeError(f"unknown torchvision detection model {model_name!r}")
        try:
            weights_enum = models.get_model_weights(model_name)
            weights = weights_enum.DEFAULT
            self._model = factory(weights=weights)
        except Exception as exc:
            raise RuntimeError(
                f"could not load pretrained weights for {model_name!r}: {exc}"
            ) from exc
        self._model.eval()
        self._torch = torch
        self._categories = list(weights.meta.get("categories", []))
        self.confidence_floor = confidence_floor
        self.name = model_name

    def detect(self, image: np.ndarray, modality: str) -> list[dict]:
        torch = self._torch
        if image.ndim == 2:
            image = np.repeat(image[..., None], 3, axis=-1)
        height, width = image.shape[:2]
        tensor = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).float()
        tensor = torch.nn.functional.interpolate(
            tensor[None], size=(MODEL_INPUT_SIZE, MODEL_INPUT_SIZE),
            mode="bilinear", align_corners=False,
        )[0]
        with torch.no_grad():
            output = self._model([tensor])[0]
        sx = width / MODEL_INPUT_SIZE
        sy = height / MODEL_INPUT_SIZE
        detections = []
        for box, label, score in zip(output["boxes"], output["labels"], output["scores"]):
            confidence = float(score)
            if confidence < self.confidence_floor:
                continue
            x1, y1, x2, y2 = (float(v) for v in box)
            x = max(0.0, x1 * sx)
            y = max(0.0, y1 * sy)
            w = min(float(width), x2 * sx) - x
            h = min(float(height), y2 * sy) - y
            if w <= 0 or h <= 0:
                continue
            index = int(label)
            name = self._categories[index] if index < len(self._categories) else str(index)
            detections.append(
                {"class": name, "confidence": min(1.0, confidence), "bbox": [x, y, w, h]}
            )
        return detections


def load_backend(model: str):
    """"toy" gives the analytic blob detector; any other name is looked up
    as a torchvision detection model."""
    if model == "toy":
        return ToyBlobBackend()
    return TorchvisionBackend(model)
