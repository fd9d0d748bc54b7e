"""Build script for the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile is tolerated rather than fatal.
"""
import sys

from setuptools import Extension, setup


def make_ext_modules():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "faceswap3d.kernels._native",
        ["src/faceswap3d/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # -ffp-contract=off keeps float arithmetic bit-identical to the
        # NumPy fallback (no FMA contraction).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    try:
        return cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover - build-env dependent
        print(f"warning: skipping native kernels ({exc})", file=sys.stderr)
        return []


setup(ext_modules=make_ext_modules())
