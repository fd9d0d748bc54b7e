import io
import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image as PILImage

from faceswap3d.render import save_image
from faceswap3d.segment import (
    RegionMap,
    assemble_mask,
    load_region_map,
    mask_png_bytes,
    propose_regions,
)
from faceswap3d.server import create_app


@pytest.fixture
def frame_root(tmp_path):
    r = np.random.default_rng(1)
    for i in range(3):
        img = np.zeros((12, 16, 3), dtype=np.uint8)
        img[:, : 5 + i] = 200  # two obvious regions per frame
        save_image(img, tmp_path / f"frame{i}.png")
    return tmp_path


@pytest.fixture
def client(frame_root):
    return TestClient(create_app(frame_root, granularity=0.05))


class TestFrames:
    def test_list(self, client):
        frames = client.get("/frames").json()["frames"]
        assert [f["id"] for f in frames] == ["frame0", "frame1", "frame2"]

    def test_image_bytes(self, client, frame_root):
        body = client.get("/frame/frame0/image").content
        assert body == (frame_root / "frame0.png").read_bytes()

    def test_unknown_frame_404(self, client):
        assert client.get("/frame/nope/image").status_code == 404
        assert client.get("/frame/nope/regions").status_code == 404


class TestRegions:
    def test_regions_match_direct_computation(self, client, frame_root):
        payload = client.get("/frame/frame0/regions").json()
        from faceswap3d.render import load_image

        rm = propose_regions(load_image(frame_root / "frame0.png"), granularity=0.05)
        assert payload["count"] == rm.count == 2
        assert payload["width"] == 16 and payload["height"] == 12
        assert payload["ids"] == rm.region_id.reshape(-1).tolist()

    def test_regions_png_is_cached_and_loadable(self, client, frame_root):
        client.get("/frame/frame1/regions")
        rm = load_region_map(frame_root / "frame1.regions.png",
                             frame_root / "frame1.regions.json")
        assert rm.count >= 2


class TestMaskStorage:
    def test_post_then_get_matches_assemble(self, client, frame_root):
        payload = client.get("/frame/frame0/regions").json()
        rm = RegionMap(region_id=np.asarray(payload["ids"], dtype=np.int32)
                       .reshape(payload["height"], payload["width"]),
                       count=payload["count"])
        res = client.post("/frame/frame0/mask", json={"selected": [0]})
        assert res.status_code == 200
        stored = client.get("/frame/frame0/mask").content
        assert stored == mask_png_bytes(assemble_mask(rm, [0]))

    def test_empty_selection_empty_mask(self, client):
        res = client.post("/frame/frame1/mask", json={"selected": []})
        assert res.status_code == 200
        assert res.json()["pixels"] == 0
        body = client.get("/frame/frame1/mask").content
        arr = np.asarray(PILImage.open(io.BytesIO(body)))
        assert not arr.any()

    def test_bad_selection_400_with_diagnostics(self, client):
        res = client.post("/frame/frame0/mask", json={"selected": [99]})
        assert res.status_code == 400
        body = res.json()
        assert body["unknown_ids"] == [99]
        assert body["count"] == 2

    def test_malformed_body_400(self, client):
        res = client.post("/frame/frame0/mask", json={"selected": "zero"})
        assert res.status_code == 400

    def test_mask_404_before_store(self, client):
        assert client.get("/frame/frame2/mask").status_code == 404

    def test_selection_round_trip(self, client):
        client.post("/frame/frame0/mask", json={"selected": [1]})
        sel = client.get("/frame/frame0/selection").json()
        assert sel == {"selected": [1], "stored": True}

    def test_concurrent_posts_leave_valid_png(self, client, frame_root):
        payload = client.get("/frame/frame0/regions").json()
        count = payload["count"]
        selections = [[i % count] for i in range(16)]
        errors = []

        def post(sel):
            try:
                r = client.post("/frame/frame0/mask", json={"selected": sel})
                assert r.status_code == 200
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=post, args=(s,)) for s in selections]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        body = (frame_root / "frame0.mask.png").read_bytes()
        img = PILImage.open(io.BytesIO(body))
        img.verify()  # not torn
        rm = RegionMap(region_id=np.asarray(payload["ids"], dtype=np.int32)
                       .reshape(payload["height"], payload["width"]),
                       count=count)
        candidates = {mask_png_bytes(assemble_mask(rm, s)) for s in selections}
        assert body in candidates  # last writer won with a complete file
