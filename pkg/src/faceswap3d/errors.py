"""Exception types shared across the pipeline."""


class FaceSwapError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(FaceSwapError, ValueError):
    """An argument violates a documented precondition."""


class ModelFormatError(FaceSwapError, ValueError):
    """A morphable-model file could not be parsed."""


class MalformedHeaderError(ModelFormatError):
    """Bad magic bytes or unreadable metadata block."""


class DimensionInconsistencyError(ModelFormatError):
    """Declared dimensions disagree with the payload (e.g. bad triangle index)."""


class TruncatedPayloadError(ModelFormatError):
    """File ends before the declared arrays are complete."""


class BehindCameraError(FaceSwapError, ValueError):
    """A point to be projected has nonpositive camera-frame depth."""

    def __init__(self, index: int, depth: float):
        self.index = index
        self.depth = depth
        super().__init__(f"point {index} is behind the camera (depth {depth:.6g})")


class InsufficientCorrespondencesError(FaceSwapError, ValueError):
    """Fewer 2D-3D correspondences than the pose solver requires."""


class DegenerateConfigurationError(FaceSwapError, ValueError):
    """The 3D points do not span enough dimensions for pose recovery."""


class NoVisibleLandmarksError(FaceSwapError, ValueError):
    """Every landmark was rejected by the visibility filter."""


class UndefinedRecallError(FaceSwapError, ValueError):
    """Face recall is undefined because the ground-truth mask is empty."""


class UnknownRegionError(FaceSwapError, ValueError):
    """A selected region id does not exist in the region map."""


class GalleryExhaustedError(FaceSwapError, ValueError):
    """No eligible gallery subject remains for plan construction."""


class StageError(FaceSwapError):
    """Wraps a failure inside one named stage of the swap pipeline."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
