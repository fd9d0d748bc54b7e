"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy fallback is
used otherwise (or when FACESWAP3D_PURE=1 is set). Both expose the same four
functions with bit-identical results.
"""
import os

from . import _numpy as numpy_backend

native_backend = None
if os.environ.get("FACESWAP3D_PURE") != "1":
    try:
        from . import _native as native_backend  # type: ignore[no-redef]
    except ImportError:
        native_backend = None

_active = native_backend if native_backend is not None else numpy_backend

BACKEND_NAME = "native" if native_backend is not None else "numpy"

raster_triangles = _active.raster_triangles
bilinear_sample = _active.bilinear_sample
laplacian_apply = _active.laplacian_apply
merge_edges = _active.merge_edges

__all__ = [
    "BACKEND_NAME",
    "numpy_backend",
    "native_backend",
    "raster_triangles",
    "bilinear_sample",
    "laplacian_apply",
    "merge_edges",
]
