"""Annotation loading and synthetic demo-scene generation.

Annotations are JSON lines, one record per line:

    {"id": "task000", "visible_path": "visible_000.png",
     "infrared_path": "infrared_000.png", "bbox": [x, y, w, h],
     "class_label": "car"}

Paths resolve against the image root.  The bbox is shared between the
two images, which are assumed registered; a size mismatch between the
pair is accepted with a warning as long as the bbox fits both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attack import AttackTask
from .fusion import MODALITY_INFRARED, MODALITY_VISIBLE, load_png, save_png
from .geometry import BoundingBox

DEMO_REFERENCE_COLOR = (0.2, 0.4, 0.8)  # exact under 8-bit PNG quantization
DEMO_INFRARED_BODY = 0.8
DEMO_IMAGE_W = 192
DEMO_IMAGE_H = 160


class DatasetError(RuntimeError):
    """The annotations file yielded no usable task."""


@dataclass
class AnnotationRecord:
    record_id: str
    visible_path: str
    infrared_path: str
    bbox: list[int]
    class_label: str


@dataclass
class DatasetIssue:
    line: int
    kind: str  # "rejected" | "warning"
    reason: str


def _parse_record(line_no: int, line: str) -> AnnotationRecord:
    data = json.loads(line)
    missing = [k for k in ("visible_path", "infrared_path", "bbox", "class_label") if k not in data]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    bbox = data["bbox"]
    if len(bbox) != 4 or any(not isinstance(v, int) for v in bbox):
        raise ValueError(f"bbox must be four integer pixels, got {bbox!r}")
    return AnnotationRecord(
        record_id=str(data.get("id", f"task{line_no:03d}")),
        visible_path=data["visible_path"],
        infrared_path=data["infrared_path"],
        bbox=list(bbox),
        class_label=str(data["class_label"]),
    )


def load_dataset(
    annotations_path: str | Path,
    image_root: str | Path = "",
    delta: float = 0.5,
) -> tuple[list[AttackTask], list[DatasetIssue]]:
    """One task per valid record; invalid records become reported issues.

    Raises DatasetError when no record survives (including an empty file).
    """
    annotations_path = Path(annotations_path)
    root = Path(image_root) if image_root else annotations_path.parent
    tasks: list[AttackTask] = []
    issues: list[DatasetIssue] = []
    with open(annotations_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rec = _parse_record(line_no, line)
                visible = load_png(root / rec.visible_path, MODALITY_VISIBLE)
                infrared = load_png(root / rec.infrared_path, MODALITY_INFRARED)
                box = BoundingBox(*rec.bbox)
                for name, img in (("visible", visible), ("infrared", infrared)):
                    h, w = img.shape[:2]
                    if not box.fits_inside(w, h):
                        raise ValueError(f"bbox {rec.bbox} outside the {name} image ({w}x{h})")
                if visible.shape[:2] != infrared.shape:
                    issues.append(
                        DatasetIssue(
                            line_no,
                            "warning",
                            f"{rec.record_id}: image sizes differ "
                            f"({visible.shape[1]}x{visible.shape[0]} vs {infrared.shape[1]}x{infrared.shape[0]}); "
                            "registration is the caller's responsibility",
                        )
                    )
                tasks.append(
                    AttackTask(
                        visible_image=visible,
                        infrared_image=infrared,
                        box=box,
                        class_label=rec.class_label,
                        delta=delta,
                        task_id=rec.record_id,
                    )
                )
            except Exception as exc:
                issues.append(DatasetIssue(line_no, "rejected", str(exc)))
    if not tasks:
        raise DatasetError(f"{annotations_path}: no valid annotation records")
    return tasks, issues


def generate_demo(
    out_dir: str | Path,
    count: int,
    seed: int,
    reference_color: tuple[float, float, float] = DEMO_REFERENCE_COLOR,
    infrared_body: float = DEMO_INFRARED_BODY,
    class_label: str = "car",
) -> Path:
    """Write synthetic registered pairs tuned for the toy oracles.

    Each scene is a noise background with a vehicle-sized box painted
    uniformly: the reference color in the visible image, a warm constant
    in the infrared one.  Both constants survive 8-bit PNG quantization
    exactly, so the clean toy confidences are exactly 1.0 and any patch
    family covering a quarter of the box can reach the 0.5 threshold.
    Returns the annotations path; byte-identical for identical seeds.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(count):
        w = int(rng.integers(88, 113))
        h = int(rng.integers(72, 93))
        x = int(rng.integers(8, DEMO_IMAGE_W - w - 8 + 1))
        y = int(rng.integers(8, DEMO_IMAGE_H - h - 8 + 1))
        visible = rng.uniform(0.0, 1.0, size=(DEMO_IMAGE_H, DEMO_IMAGE_W, 3))
        visible[y : y + h, x : x + w] = reference_color
        infrared = rng.uniform(0.0, 1.0, size=(DEMO_IMAGE_H, DEMO_IMAGE_W))
        infrared[y : y + h, x : x + w] = infrared_body
        record_id = f"task{i:03d}"
        visible_name = f"{record_id}_visible.png"
        infrared_name = f"{record_id}_infrared.png"
        save_png(out / visible_name, visible)
        save_png(out / infrared_name, infrared)
        lines.append(
            json.dumps(
                {
                    "id": record_id,
                    "visible_path": visible_name,
                    "infrared_path": infrared_name,
                    "bbox": [x, y, w, h],
                    "class_label": class_label,
                },
                separators=(", ", ": "),
            )
        )
    annotations = out / "annotations.jsonl"
    annotations.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return annotations
