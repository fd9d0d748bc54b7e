"""Geometric face swapping with file-based inputs for all learned components.

Subpackages/modules map onto the pipeline stages: model (3DMM), pose (EPnP),
expression (bounded LLS), segment (masks + metrics), render (sampling +
rasterization), blend (Poisson compositing), evalharness (verification
protocols), pipeline/cli (orchestration), server (labeling backend).
"""
from .kernels import BACKEND_NAME

__version__ = "0.1.0"

__all__ = ["BACKEND_NAME", "__version__"]
