"""Local HTTP service backing the mask-labeling UI.

Frames are the images under a root directory; region proposals are computed
once per frame and cached beside it. Mask writes are atomic (temp + rename),
so concurrent saves settle last-write-wins without torn files.

Endpoints:
  GET  /frames                  -> {"frames": [{"id", "image"}, ...]}
  GET  /frame/{id}/image        -> PNG
  GET  /frame/{id}/regions      -> {"count", "width", "height", "ids", "png_base64"}
  GET  /frame/{id}/regions.png  -> 16-bit region-id PNG
  GET  /frame/{id}/mask         -> stored mask PNG (404 when unset)
  POST /frame/{id}/mask         -> {"selected": [region ids]} stores the mask
"""
import base64
import os
import tempfile
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response

from .errors import UnknownRegionError
from .render import load_image
from .segment import (
    DEFAULT_GRANULARITY,
    Mask,
    RegionMap,
    assemble_mask,
    load_region_map,
    mask_png_bytes,
    propose_regions,
    save_region_map,
    selection_from_mask,
)

FRAME_SUFFIXES = (".png", ".jpg", ".jpeg")
SIDE_SUFFIXES = (".mask.png", ".regions.png")


def _is_frame(path: Path) -> bool:
    if path.suffix.lower() not in FRAME_SUFFIXES:
        return False
    return not any(path.name.endswith(s) for s in SIDE_SUFFIXES)


def _atomic_write(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def create_app(root, granularity: float = DEFAULT_GRANULARITY) -> FastAPI:
    root = Path(root)
    app = FastAPI(title="faceswap3d mask editor")
    region_lock = threading.Lock()

    def frames() -> dict:
        out = {}
        for p in sorted(root.iterdir()):
            if p.is_file() and _is_frame(p):
                out[p.stem] = p
        return out

    def frame_path(frame_id: str):
        return frames().get(frame_id)

    def regions_for(frame: Path) -> RegionMap:
        png = frame.parent / f"{frame.stem}.regions.png"
        meta = frame.parent / f"{frame.stem}.regions.json"
        with region_lock:
            if png.exists() and meta.exists():
                return load_region_map(png, meta)
            rm = propose_regions(load_image(frame), granularity=granularity)
            save_region_map(rm, png, meta)
            return rm

    def not_found(frame_id: str):
        return JSONResponse({"error": f"unknown frame {frame_id!r}"}, status_code=404)

    @app.get("/frames")
    def list_frames():
        return {"frames": [{"id": fid, "image": p.name}
                           for fid, p in frames().items()]}

    @app.get("/frame/{frame_id}/image")
    def frame_image(frame_id: str):
        p = frame_path(frame_id)
        if p is None:
            return not_found(frame_id)
        return Response(content=p.read_bytes(), media_type="image/png")

    @app.get("/frame/{frame_id}/regions")
    def frame_regions(frame_id: str):
        p = frame_path(frame_id)
        if p is None:
            return not_found(frame_id)
        rm = regions_for(p)
        png = p.parent / f"{p.stem}.regions.png"
        return {
            "count": rm.count,
            "width": rm.width,
            "height": rm.height,
            "ids": rm.region_id.reshape(-1).tolist(),
            "png_base64": base64.b64encode(png.read_bytes()).decode("ascii"),
        }

    @app.get("/frame/{frame_id}/regions.png")
    def frame_regions_png(frame_id: str):
        p = frame_path(frame_id)
        if p is None:
            return not_found(frame_id)
        regions_for(p)
        png = p.parent / f"{p.stem}.regions.png"
        return Response(content=png.read_bytes(), media_type="image/png")

    @app.get("/frame/{frame_id}/mask")
    def frame_mask(frame_id: str):
        p = frame_path(frame_id)
        if p is None:
            return not_found(frame_id)
        mask_file = p.parent / f"{p.stem}.mask.png"
        if not mask_file.exists():
            return JSONResponse({"error": "no mask stored"}, status_code=404)
        return Response(content=mask_file.read_bytes(), media_type="image/png")

    @app.post("/frame/{frame_id}/mask")
    def store_mask(frame_id: str, payload: dict):
        p = frame_path(frame_id)
        if p is None:
            return not_found(frame_id)
        selected = payload.get("selected")
        if not isinstance(selected, list) or any(not isinstance(s, int) for s in selected):
            return JSONResponse(
                {"error": "body must be {\"selected\": [region ids]}"}, status_code=400)
        rm = regions_for(p)
        try:
            mask = assemble_mask(rm, selected)
        except UnknownRegionError as exc:
            unknown = sorted(s for s in set(selected) if s < 0 or s >= rm.count)
            return JSONResponse(
                {"error": str(exc), "unknown_ids": unknown, "count": rm.count},
                status_code=400)
        _atomic_write(p.parent / f"{p.stem}.mask.png", mask_png_bytes(mask))
        return {"ok": True, "pixels": int(np.count_nonzero(mask.labels)),
                "selected": sorted(set(selected))}

    @app.get("/frame/{frame_id}/selection")
    def frame_selection(frame_id: str):
        """Selected region ids recovered from the stored mask (for reload)."""
        p = frame_path(frame_id)
        if p is None:
            return not_found(frame_id)
        mask_file = p.parent / f"{p.stem}.mask.png"
        rm = regions_for(p)
        if not mask_file.exists():
            return {"selected": [], "stored": False}
        from .segment import load_mask

        return {"selected": selection_from_mask(rm, load_mask(mask_file)),
                "stored": True}

    return app


def serve(root, port: int = 8000, host: str = "127.0.0.1",
          granularity: float = DEFAULT_GRANULARITY, ui_dir=None) -> None:
    import uvicorn

    app = create_app(root, granularity=granularity)
    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    uvicorn.run(app, host=host, port=port, log_level="warning")
