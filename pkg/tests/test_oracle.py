"""Toy oracle closed forms, IoU matching, counters, and the HTTP client."""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from conftest import cell_center_octagon, random_patch
from patchforge.fusion import ModalityError, fuse_infrared
from patchforge.geometry import BoundingBox, rasterize_mask
from patchforge.oracle import (
    ConstantOracle,
    Detection,
    RemoteOracle,
    ToyInfraredOracle,
    ToyVisibleOracle,
    TransportError,
    iou,
    target_confidence,
    toy_infrared_confidence,
    toy_visible_confidence,
)

REF = (0.2, 0.4, 0.8)


class TestIoU:
    def test_disjoint_boxes(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 10, 10)) == 0.0

    def test_identical_boxes(self):
        box = BoundingBox(5, 5, 10, 20)
        assert iou(box, box) == 1.0

    def test_half_overlap(self):
        a = BoundingBox(0, 0, 10, 10)
        b = BoundingBox(5, 0, 10, 10)
        assert iou(a, b) == pytest.approx(50 / 150)


class TestToyInfrared:
    def test_uniform_bright_image_full_confidence(self):
        image = np.full((50, 50), 0.8)
        box = BoundingBox(5, 5, 40, 40)
        assert toy_infrared_confidence(image, box) == 1.0
        oracle = ToyInfraredOracle(box)
        dets = oracle.detect(image)
        assert len(dets) == 1 and dets[0].confidence == 1.0

    def test_fully_dark_image_suppresses_detection(self):
        image = np.zeros((50, 50))
        box = BoundingBox(5, 5, 40, 40)
        oracle = ToyInfraredOracle(box)
        assert oracle.detect(image) == []
        assert target_confidence(oracle, image, box, "car") == 0.0

    def test_cell_center_octagon_closed_form(self):
        # Coverage 4/9 of dark pixels: confidence = 1 - (4/9)/0.5 = 1/9.
        image = np.full((300, 300), 0.8)
        box = BoundingBox(0, 0, 300, 300)
        fused = fuse_infrared(image, box, cell_center_octagon(), 0.1)
        conf = toy_infrared_confidence(fused, box)
        assert conf == pytest.approx(1 / 9, abs=0.02)

    def test_half_coverage_saturates_to_zero(self):
        image = np.full((40, 40), 0.9)
        image[:, :24] = 0.0  # 60% of every row dark
        box = BoundingBox(0, 0, 40, 40)
        assert toy_infrared_confidence(image, box) == 0.0

    def test_monotone_in_nested_masks(self, rng):
        # Growing the dark region can only lower the confidence.
        image = np.full((120, 120), 0.8)
        box = BoundingBox(10, 10, 100, 100)
        small = fuse_infrared(image, box, cell_center_octagon(), 0.1)
        mask_small = rasterize_mask(cell_center_octagon(), box.w, box.h)
        grown = small.copy()
        grown[10:110, 10:60] = 0.1  # superset of the small mask's left half
        assert toy_infrared_confidence(grown, box) <= toy_infrared_confidence(small, box)

    def test_rejects_visible_input(self, rng):
        oracle = ToyInfraredOracle(BoundingBox(0, 0, 5, 5))
        with pytest.raises(ModalityError):
            oracle.detect(rng.uniform(size=(5, 5, 3)))


class TestToyVisible:
    def test_reference_colored_box_full_confidence(self):
        image = np.empty((30, 30, 3))
        image[:] = REF
        box = BoundingBox(2, 2, 25, 25)
        assert toy_visible_confidence(image, box, REF) == 1.0

    def test_far_color_everywhere_saturates(self):
        image = np.ones((30, 30, 3))  # white is far from REF
        box = BoundingBox(2, 2, 25, 25)
        assert toy_visible_confidence(image, box, REF) == 0.0
        oracle = ToyVisibleOracle(box, REF)
        assert oracle.detect(image) == []

    def test_reference_colored_patch_is_invisible_to_the_oracle(self):
        # Adversarial-failure fixture: a patch painted exactly the reference
        # color changes nothing for this oracle; the optimizer must move away.
        from patchforge.colorgrid import ColorGrid, UnifiedPatch
        from patchforge.fusion import fuse_visible
        from conftest import full_square_octagon

        image = np.empty((40, 40, 3))
        image[:] = REF
        box = BoundingBox(5, 5, 30, 30)
        patch = UnifiedPatch(full_square_octagon(), ColorGrid(1, np.array([REF])))
        fused = fuse_visible(image, box, patch)
        assert toy_visible_confidence(fused, box, REF) == 1.0


class TestTargetConfidence:
    def test_no_detections_returns_zero(self):
        box = BoundingBox(0, 0, 10, 10)
        oracle = ConstantOracle(box, 0.0)
        assert target_confidence(oracle, np.zeros((20, 20)), box, "car") == 0.0

    def test_single_match_passes_through(self):
        box = BoundingBox(0, 0, 10, 10)
        oracle = ConstantOracle(box, 0.83)
        assert target_confidence(oracle, np.zeros((20, 20)), box, "car") == 0.83

    def test_max_over_matching_only(self):
        # Two matching detections (0.6, 0.9) plus a confident non-matching
        # one elsewhere: the brute-force IoU filter keeps 0.9.
        target = BoundingBox(0, 0, 10, 10)

        class Multi(ConstantOracle):
            def _run_detect(self, image):
                return [
                    Detection("car", 0.6, BoundingBox(0, 0, 10, 10)),
                    Detection("car", 0.9, BoundingBox(1, 0, 10, 10)),
                    Detection("car", 0.99, BoundingBox(40, 40, 10, 10)),
                    Detection("person", 1.0, BoundingBox(0, 0, 10, 10)),
                ]

        oracle = Multi(target, 0.5)
        candidates = [
            ("car", 0.6, BoundingBox(0, 0, 10, 10)),
            ("car", 0.9, BoundingBox(1, 0, 10, 10)),
            ("car", 0.99, BoundingBox(40, 40, 10, 10)),
            ("person", 1.0, BoundingBox(0, 0, 10, 10)),
        ]
        brute = max(
            (c for label, c, b in candidates if label == "car" and iou(b, target) >= 0.5),
            default=0.0,
        )
        assert brute == 0.9
        assert target_confidence(oracle, np.zeros((60, 60)), target, "car") == 0.9

    def test_never_exceeds_raw_max(self, rng):
        box = BoundingBox(0, 0, 12, 12)
        oracle = ToyInfraredOracle(box)
        image = rng.uniform(size=(20, 20))
        raw = max((d.confidence for d in ToyInfraredOracle(box).detect(image)), default=0.0)
        assert target_confidence(oracle, image, box, "car") <= raw


class TestQueryCounting:
    def test_one_increment_per_detect(self):
        box = BoundingBox(0, 0, 8, 8)
        oracle = ToyInfraredOracle(box)
        image = np.full((10, 10), 0.9)
        for expected in range(1, 6):
            oracle.detect(image)
            assert oracle.query_count == expected

    def test_counter_exact_under_concurrency(self):
        box = BoundingBox(0, 0, 8, 8)
        oracle = ToyInfraredOracle(box)
        image = np.full((10, 10), 0.9)
        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(lambda _: oracle.detect(image), range(400)))
        assert oracle.query_count == 400


class _CannedHandler(BaseHTTPRequestHandler):
    canned = {
        "detections": [
            {"class": "car", "confidence": 0.91, "bbox": [12, 8, 100, 60]},
            {"class": "person", "confidence": 0.33, "bbox": [3, 3, 20, 40]},
        ]
    }
    fail_times = 0
    seen: list[dict] = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append(body)
        if type(self).fail_times > 0:
            type(self).fail_times -= 1
            self.send_response(503)
            self.end_headers()
            self.wfile.write(b"busy")
            return
        payload = json.dumps(self.canned).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        payload = json.dumps({"status": "ok", "model": "canned"}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def canned_server():
    _CannedHandler.fail_times = 0
    _CannedHandler.seen = []
    server = HTTPServer(("127.0.0.1", 0), _CannedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    thread.join(timeout=5)


class TestRemoteOracle:
    def test_round_trip_parses_canned_payload(self, canned_server, rng):
        oracle = RemoteOracle(canned_server, "visible")
        dets = oracle.detect(rng.uniform(size=(30, 40, 3)))
        assert [d.class_label for d in dets] == ["car", "person"]
        assert dets[0].confidence == 0.91
        assert dets[0].box == BoundingBox(12, 8, 100, 60)
        assert oracle.query_count == 1
        sent = _CannedHandler.seen[-1]
        assert sent["modality"] == "visible"
        assert isinstance(sent["image"], str) and len(sent["image"]) > 0

    def test_retries_then_succeeds(self, canned_server, rng):
        _CannedHandler.fail_times = 2
        oracle = RemoteOracle(canned_server, "infrared", retries=2, backoff=0.01)
        dets = oracle.detect(rng.uniform(size=(20, 20)))
        assert len(dets) == 2
        assert oracle.query_count == 1  # one image submitted, despite retries

    def test_exhausted_retries_raise_transport_error(self, canned_server, rng):
        _CannedHandler.fail_times = 10
        oracle = RemoteOracle(canned_server, "infrared", retries=1, backoff=0.01)
        with pytest.raises(TransportError) as err:
            oracle.detect(rng.uniform(size=(20, 20)))
        assert err.value.attempts == 2
        assert err.value.status == 503

    def test_unreachable_endpoint(self, rng):
        oracle = RemoteOracle("http://127.0.0.1:9", "visible", retries=0, timeout=0.3)
        with pytest.raises(TransportError):
            oracle.detect(rng.uniform(size=(10, 10, 3)))

    def test_health_round_trip(self, canned_server):
        oracle = RemoteOracle(canned_server, "visible")
        assert oracle.health() == {"status": "ok", "model": "canned"}
