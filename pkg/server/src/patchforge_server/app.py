"""FastAPI application implementing the detector wire protocol.

POST /detect accepts {"image": <base64 PNG>, "modality": "visible" |
"infrared"} and returns {"detections": [{"class", "confidence", "bbox"}]}.
GET /health reports {"status": "ok", "model": <name>}.  Malformed JSON or
base64 yields HTTP 400; inference failures yield HTTP 500.  Responses
depend only on the request body.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading
from typing import Literal

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image as PILImage
from pydantic import BaseModel


class DetectRequest(BaseModel):
    image: str
    modality: Literal["visible", "infrared"]


def _decode_image(payload: DetectRequest) -> np.ndarray:
    try:
        raw = base64.b64decode(payload.image, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValueError(f"invalid base64 image data: {exc}") from exc
    try:
        img = PILImage.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise ValueError(f"image bytes are not a decodable image: {exc}") from exc
    if payload.modality == "infrared":
        arr = np.asarray(img.convert("L"), dtype=float) / 255.0
    else:
        arr = np.asarray(img.convert("RGB"), dtype=float) / 255.0
    return arr


def create_app(backend, model_name: str | None = None) -> FastAPI:
    app = FastAPI(title="patchforge detector oracle")
    name = model_name or getattr(backend, "name", "unknown")
    # One model instance; inference serialized behind a lock by default.
    inference_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def bad_request(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "model": name}

    @app.post("/detect")
    def detect(payload: DetectRequest):
        try:
            image = _decode_image(payload)
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        try:
            with inference_lock:
                detections = backend.detect(image, payload.modality)
        except Exception as exc:
            return JSONResponse(status_code=500, content={"error": f"inference failed: {exc}"})
        return {"detections": detections}

    return app
