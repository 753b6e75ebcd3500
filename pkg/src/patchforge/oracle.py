"""Detector oracles: the opaque query interface, analytic toys, HTTP client.

An oracle exposes detect(image) -> detections plus an atomic query
counter.  The toy oracles have closed-form confidences so attack tests
can be checked exactly; the remote client speaks the detector wire
protocol (POST /detect with a base64 PNG, GET /health).
"""

from __future__ import annotations

import base64
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests

from .geometry import BoundingBox

IOU_MATCH_THRESHOLD = 0.5

DEFAULT_DARK_THRESHOLD = 0.3
DEFAULT_INFRARED_SATURATION = 0.5
DEFAULT_COLOR_THRESHOLD = 0.25
DEFAULT_VISIBLE_SATURATION = 0.5


@dataclass(frozen=True)
class Detection:
    class_label: str
    confidence: float
    box: BoundingBox

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


class TransportError(RuntimeError):
    """Remote oracle could not complete a request; carries retry metadata."""

    def __init__(self, message: str, url: str, attempts: int, status: int | None = None):
        super().__init__(message)
        self.url = url
        self.attempts = attempts
        self.status = status


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes."""
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = max(0.0, ix2 - ix)
    ih = max(0.0, iy2 - iy)
    inter = iw * ih
    if inter <= 0.0:
        return 0.0
    union = a.w * a.h + b.w * b.h - inter
    return float(inter / union)


class DetectorOracle:
    """Base detector interface with a thread-safe query counter.

    detect() increments the counter exactly once per call before
    dispatching to the subclass hook, so counts stay exact under
    concurrent use and under downstream failures.
    """

    modality = "visible"

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._query_count = 0

    @property
    def query_count(self) -> int:
        with self._lock:
            return self._query_count

    def detect(self, image: np.ndarray) -> list[Detection]:
        self._check_modality(image)
        with self._lock:
            self._query_count += 1
        return self._run_detect(image)

    def _run_detect(self, image: np.ndarray) -> list[Detection]:
        raise NotImplementedError

    def _check_modality(self, image: np.ndarray) -> None:
        from .fusion import require_infrared, require_visible  # avoid import cycle at module load

        if self.modality == "infrared":
            require_infrared(image)
        else:
            require_visible(image)


def target_confidence(
    oracle: DetectorOracle,
    image: np.ndarray,
    target: BoundingBox,
    class_label: str,
    min_iou: float = IOU_MATCH_THRESHOLD,
) -> float:
    """Best confidence among detections matching the target class and box.

    A detection matches when its class equals class_label and its IoU with
    the target box is at least min_iou.  No match returns 0.0: a vanished
    target counts as fully attacked.
    """
    best = 0.0
    for det in oracle.detect(image):
        if det.class_label == class_label and iou(det.box, target) >= min_iou:
            best = max(best, det.confidence)
    return best


def toy_infrared_confidence(
    image: np.ndarray,
    box: BoundingBox,
    dark_threshold: float = DEFAULT_DARK_THRESHOLD,
    saturation: float = DEFAULT_INFRARED_SATURATION,
) -> float:
    """Closed-form infrared toy: confidence falls linearly with the dark
    fraction of the box and saturates to 0 at the given coverage."""
    region = image[box.y : box.y + box.h, box.x : box.x + box.w]
    dark = float(np.mean(region < dark_threshold))
    return max(0.0, 1.0 - dark / saturation)


def toy_visible_confidence(
    image: np.ndarray,
    box: BoundingBox,
    reference_color,
    color_threshold: float = DEFAULT_COLOR_THRESHOLD,
    saturation: float = DEFAULT_VISIBLE_SATURATION,
) -> float:
    """Closed-form visible toy: confidence falls linearly with the fraction
    of box pixels whose RGB distance from the reference color exceeds the
    threshold."""
    region = image[box.y : box.y + box.h, box.x : box.x + box.w, :]
    dist = np.linalg.norm(region - np.asarray(reference_color, dtype=float), axis=-1)
    off = float(np.mean(dist > color_threshold))
    return max(0.0, 1.0 - off / saturation)


class ToyInfraredOracle(DetectorOracle):
    """Analytic stand-in for a fine-tuned infrared detector.

    Registered with one target box; reports a single detection there with
    the closed-form confidence, suppressed entirely when it reaches 0.
    """

    modality = "infrared"

    def __init__(
        self,
        box: BoundingBox,
        class_label: str = "car",
        dark_threshold: float = DEFAULT_DARK_THRESHOLD,
        saturation: float = DEFAULT_INFRARED_SATURATION,
    ):
        super().__init__()
        self.box = box
        self.class_label = class_label
        self.dark_threshold = dark_threshold
        self.saturation = saturation

    def _run_detect(self, image: np.ndarray) -> list[Detection]:
        conf = toy_infrared_confidence(image, self.box, self.dark_threshold, self.saturation)
        if conf <= 0.0:
            return []
        return [Detection(self.class_label, conf, self.box)]


class ToyVisibleOracle(DetectorOracle):
    """Analytic stand-in for a visible-light detector keyed to a reference color."""

    modality = "visible"

    def __init__(
        self,
        box: BoundingBox,
        reference_color,
        class_label: str = "car",
        color_threshold: float = DEFAULT_COLOR_THRESHOLD,
        saturation: float = DEFAULT_VISIBLE_SATURATION,
    ):
        super().__init__()
        self.box = box
        self.reference_color = tuple(float(c) for c in reference_color)
        self.class_label = class_label
        self.color_threshold = color_threshold
        self.saturation = saturation

    def _run_detect(self, image: np.ndarray) -> list[Detection]:
        conf = toy_visible_confidence(
            image, self.box, self.reference_color, self.color_threshold, self.saturation
        )
        if conf <= 0.0:
            return []
        return [Detection(self.class_label, conf, self.box)]


class ConstantOracle(DetectorOracle):
    """Always reports the registered box at a fixed confidence.  Test rig for
    unattackable (1.0) and trivially-attacked (0.0) oracles."""

    def __init__(self, box: BoundingBox, confidence: float, class_label: str = "car", modality: str = "infrared"):
        super().__init__()
        self.modality = modality
        self.box = box
        self.confidence = confidence
        self.class_label = class_label

    def _run_detect(self, image: np.ndarray) -> list[Detection]:
        if self.confidence <= 0.0:
            return []
        return [Detection(self.class_label, self.confidence, self.box)]


class RemoteOracle(DetectorOracle):
    """HTTP client for a detector service speaking the wire protocol.

    POST {endpoint}/detect with {"image": <base64 PNG>, "modality": ...};
    the response's detections become Detection values.  Non-200 responses
    and connection failures are retried, then raised as TransportError
    with the attempt count.
    """

    def __init__(
        self,
        endpoint: str,
        modality: str,
        timeout: float = 10.0,
        retries: int = 2,
        backoff: float = 0.2,
        session: requests.Session | None = None,
    ):
        super().__init__()
        if modality not in ("visible", "infrared"):
            raise ValueError(f"unknown modality {modality!r}")
        self.modality = modality
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def _run_detect(self, image: np.ndarray) -> list[Detection]:
        from .fusion import encode_png_bytes

        payload = {
            "image": base64.b64encode(encode_png_bytes(image, self.modality)).decode("ascii"),
            "modality": self.modality,
        }
        url = f"{self.endpoint}/detect"
        attempts = 0
        last_status = None
        last_error = "no attempt made"
        while attempts <= self.retries:
            attempts += 1
            try:
                resp = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
            else:
                if resp.status_code == 200:
                    return self._parse(resp.json())
                last_status = resp.status_code
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            if attempts <= self.retries:
                time.sleep(self.backoff * attempts)
        raise TransportError(
            f"detector at {url} failed after {attempts} attempts: {last_error}",
            url=url,
            attempts=attempts,
            status=last_status,
        )

    @staticmethod
    def _parse(body: dict) -> list[Detection]:
        dets = []
        for item in body.get("detections", []):
            x, y, w, h = item["bbox"]
            dets.append(
                Detection(
                    class_label=str(item["class"]),
                    confidence=float(item["confidence"]),
                    box=BoundingBox(x, y, w, h),
                )
            )
        return dets

    def health(self) -> dict:
        url = f"{self.endpoint}/health"
        try:
            resp = self._session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"health check failed: {exc}", url=url, attempts=1) from exc
        if resp.status_code != 200:
            raise TransportError(
                f"health check returned HTTP {resp.status_code}",
                url=url,
                attempts=1,
                status=resp.status_code,
            )
        return resp.json()
