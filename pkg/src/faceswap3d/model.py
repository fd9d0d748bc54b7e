"""3D morphable face model: representation, synthesis, landmarks, and I/O.

A face shape is a mean plus linear combinations of a shape basis and an
expression basis. Coordinates are millimeter-like model units in a
camera-aligned frame: x right, y down, z away from the viewer, so a face
looking at the camera has its visible surface normals pointing toward -z and
an identity rotation is a frontal view.
"""
import io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    DimensionInconsistencyError,
    InvalidArgumentError,
    MalformedHeaderError,
    TruncatedPayloadError,
)

MAGIC = b"FF3DMM01"

DEFAULT_SHAPE_DIM = 99
DEFAULT_EXPR_DIM = 29
LANDMARK_COUNT = 68


@dataclass(frozen=True)
class MorphableModel:
    """Immutable linear face model (mean + shape basis + expression basis)."""

    mean_shape: np.ndarray  # (3N,)
    shape_basis: np.ndarray  # (3N, Ks)
    expr_basis: np.ndarray  # (3N, Ke)
    expr_sigma: np.ndarray  # (Ke,), positive
    triangles: np.ndarray  # (T, 3) int32
    convention: str = "ibug68"

    def __post_init__(self):
        if self.mean_shape.ndim != 1 or self.mean_shape.size % 3 != 0:
            raise InvalidArgumentError("mean shape must be a flat 3N vector")
        n = self.n_vertices
        if self.shape_basis.shape[0] != 3 * n or self.expr_basis.shape[0] != 3 * n:
            raise InvalidArgumentError("basis row count must be 3N")
        if self.expr_sigma.shape != (self.expr_basis.shape[1],):
            raise InvalidArgumentError("sigma length must match expression dimension")
        if np.any(self.expr_sigma <= 0):
            raise InvalidArgumentError("expression sigmas must be positive")
        if self.triangles.size and int(self.triangles.max()) >= n:
            raise InvalidArgumentError("triangle index out of range")
        if self.triangles.size and int(self.triangles.min()) < 0:
            raise InvalidArgumentError("negative triangle index")

    @property
    def n_vertices(self) -> int:
        return self.mean_shape.size // 3

    @property
    def shape_dim(self) -> int:
        return self.shape_basis.shape[1]

    @property
    def expr_dim(self) -> int:
        return self.expr_basis.shape[1]

    def mean_vertices(self) -> "Vertices":
        return synthesize_shape(self, None, None)


@dataclass
class ShapeCoeffs:
    """Subject shape coefficients (alpha)."""

    alpha: np.ndarray

    @classmethod
    def zeros(cls, model: MorphableModel) -> "ShapeCoeffs":
        return cls(np.zeros(model.shape_dim))


@dataclass
class ExpressionCoeffs:
    """Expression coefficients (gamma); fitted values satisfy |g_j| <= 3*sigma_j."""

    gamma: np.ndarray

    @classmethod
    def zeros(cls, model: MorphableModel) -> "ExpressionCoeffs":
        return cls(np.zeros(model.expr_dim))


@dataclass(frozen=True)
class LandmarkMapping:
    """Ordered landmark -> vertex-index selection (fixed once per model)."""

    vertex_indices: np.ndarray  # (L,) int
    convention: str = "ibug68"

    def __post_init__(self):
        idx = np.asarray(self.vertex_indices)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidArgumentError("mapping must be a nonempty index sequence")
        if len(np.unique(idx)) != idx.size:
            raise InvalidArgumentError("mapping indices must be unique")
        if idx.min() < 0:
            raise InvalidArgumentError("mapping indices must be nonnegative")

    def __len__(self) -> int:
        return self.vertex_indices.size


@dataclass
class Vertices:
    """A concrete vertex set sharing the model topology."""

    coords: np.ndarray  # (N, 3)
    colors: Optional[np.ndarray] = None  # (N, 3) float, 0..255
    normals: Optional[np.ndarray] = None  # (N, 3) unit
    sampled: Optional[np.ndarray] = None  # (N,) bool, set by texture sampling

    def __post_init__(self):
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise InvalidArgumentError("coords must be (N, 3)")

    @property
    def count(self) -> int:
        return self.coords.shape[0]


def synthesize_shape(model: MorphableModel,
                     alpha: Optional[ShapeCoeffs],
                     gamma: Optional[ExpressionCoeffs]) -> Vertices:
    """Evaluate the generative model: mean + shape_basis*alpha + expr_basis*gamma."""
    flat = model.mean_shape.astype(np.float64, copy=True)
    if alpha is not None:
        a = np.asarray(alpha.alpha, dtype=np.float64)
        if a.shape != (model.shape_dim,):
            raise InvalidArgumentError(
                f"alpha has length {a.size}, model expects {model.shape_dim}")
        flat += model.shape_basis @ a
    if gamma is not None:
        g = np.asarray(gamma.gamma, dtype=np.float64)
        if g.shape != (model.expr_dim,):
            raise InvalidArgumentError(
                f"gamma has length {g.size}, model expects {model.expr_dim}")
        flat += model.expr_basis @ g
    return Vertices(coords=flat.reshape(-1, 3))


def select_landmarks(vertices: Vertices, mapping: LandmarkMapping) -> np.ndarray:
    """Pick the landmark vertices, in mapping order. Returns (L, 3)."""
    idx = np.asarray(mapping.vertex_indices)
    if idx.max() >= vertices.count:
        raise InvalidArgumentError(
            f"mapping index {int(idx.max())} out of range for {vertices.count} vertices")
    return vertices.coords[idx]


def compute_vertex_normals(coords: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted per-vertex normals from triangle geometry."""
    normals = np.zeros_like(coords, dtype=np.float64)
    a = coords[triangles[:, 0]]
    b = coords[triangles[:, 1]]
    c = coords[triangles[:, 2]]
    face_n = np.cross(b - a, c - a)
    for k in range(3):
        np.add.at(normals, triangles[:, k], face_n)
    norm = np.linalg.norm(normals, axis=1)
    nz = norm > 0
    normals[nz] /= norm[nz, None]
    return normals


# --- synthetic fixture model -------------------------------------------------

# Landmark layout on the face proxy as (azimuth, elevation) in degrees.
# Azimuth rotates about the vertical axis (positive toward +x), elevation is
# positive upward (-y). The jaw contour sits well inside the silhouette so
# frontal views keep every landmark camera-facing.
def _landmark_directions() -> np.ndarray:
    pts = []
    for k in range(17):  # jaw 0-16
        az = -70.0 + 140.0 * k / 16.0
        el = -10.0 - 45.0 * math.sin(math.pi * k / 16.0)
        pts.append((az, el))
    for side in (-1.0, 1.0):  # brows 17-26
        for k in range(5):
            pts.append((side * (12.0 + 7.5 * k) if side > 0 else side * (42.0 - 7.5 * k), 28.0))
    for el in (18.0, 11.0, 4.0, -2.0):  # nose bridge 27-30
        pts.append((0.0, el))
    for az in (-12.0, -6.0, 0.0, 6.0, 12.0):  # nostril row 31-35
        pts.append((az, -10.0))
    eye_az = (-7.0, -3.0, 3.0, 7.0, 3.0, -3.0)
    eye_el = (0.0, 4.0, 4.0, 0.0, -4.0, -4.0)
    for cx in (-24.0, 24.0):  # eyes 36-47
        for dx, dy in zip(eye_az, eye_el):
            pts.append((cx + dx, 14.0 + dy))
    for m in range(12):  # outer mouth 48-59
        ang = math.pi + 2.0 * math.pi * m / 12.0
        pts.append((16.0 * math.cos(ang), -28.0 - 8.0 * math.sin(ang)))
    for m in range(8):  # inner mouth 60-67
        ang = math.pi + 2.0 * math.pi * m / 8.0
        pts.append((9.0 * math.cos(ang), -28.0 - 4.0 * math.sin(ang)))
    return np.asarray(pts)


def _direction_vectors(az_el_deg: np.ndarray) -> np.ndarray:
    az = np.radians(az_el_deg[:, 0])
    el = np.radians(az_el_deg[:, 1])
    return np.stack(
        [np.cos(el) * np.sin(az), -np.sin(el), -np.cos(el) * np.cos(az)], axis=1)


def generate_synthetic_model(seed: int, n_vertices: int = 500,
                             shape_dim: int = DEFAULT_SHAPE_DIM,
                             expr_dim: int = DEFAULT_EXPR_DIM):
    """Deterministic ellipsoidal face proxy with a 68-landmark mapping.

    Returns (model, mapping). Vertices are a Fibonacci-lattice ellipsoid
    (semi-axes 75 x 95 x 70 model units) triangulated by its convex hull,
    with triangles wound so geometric normals point outward. Basis columns
    are unit-norm Gaussian draws.
    """
    from scipy.spatial import ConvexHull  # fixture-only dependency

    dirs68 = _direction_vectors(_landmark_directions())
    if n_vertices < dirs68.shape[0]:
        raise InvalidArgumentError(
            f"need at least {dirs68.shape[0]} vertices for the landmark mapping")
    if shape_dim < 1 or expr_dim < 1:
        raise InvalidArgumentError("basis dimensions must be >= 1")

    rng = np.random.default_rng(seed)
    n = n_vertices
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    golden = math.pi * (3.0 - math.sqrt(5.0))
    theta = golden * i
    r = np.sqrt(1.0 - z * z)
    unit = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)

    axes = np.array([75.0, 95.0, 70.0])
    coords = unit * axes

    hull = ConvexHull(coords)
    triangles = hull.simplices.astype(np.int32)
    # wind every triangle outward (centroid direction works on a convex body)
    a = coords[triangles[:, 0]]
    b = coords[triangles[:, 1]]
    c = coords[triangles[:, 2]]
    face_n = np.cross(b - a, c - a)
    centroid = (a + b + c) / 3.0
    flip = np.einsum("ij,ij->i", face_n, centroid) < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    targets = dirs68 * axes
    mapping_idx = np.full(dirs68.shape[0], -1, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    for k in range(dirs68.shape[0]):
        d2 = np.sum((coords - targets[k]) ** 2, axis=1)
        d2[taken] = np.inf
        j = int(np.argmin(d2))
        mapping_idx[k] = j
        taken[j] = True
    mapping = LandmarkMapping(vertex_indices=mapping_idx, convention="ibug68")

    def unit_columns(kdim):
        m = rng.standard_normal((3 * n, kdim))
        m /= np.linalg.norm(m, axis=0)
        return m

    model = MorphableModel(
        mean_shape=coords.reshape(-1).astype(np.float64),
        shape_basis=unit_columns(shape_dim),
        expr_basis=unit_columns(expr_dim),
        expr_sigma=rng.uniform(0.6, 1.8, expr_dim),
        triangles=triangles,
        convention="ibug68",
    )
    return model, mapping


# --- file formats ------------------------------------------------------------

def save_model(model: MorphableModel, path) -> None:
    """Chunked binary: magic, u32 JSON length, JSON dims, f32 arrays, u32 tris."""
    meta = {
        "N": model.n_vertices,
        "Ks": model.shape_dim,
        "Ke": model.expr_dim,
        "convention": model.convention,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(meta_bytes)))
    buf.write(meta_bytes)
    buf.write(model.mean_shape.astype("<f4").tobytes())
    buf.write(np.ascontiguousarray(model.shape_basis, dtype="<f4").tobytes())
    buf.write(np.ascontiguousarray(model.expr_basis, dtype="<f4").tobytes())
    buf.write(model.expr_sigma.astype("<f4").tobytes())
    buf.write(np.ascontiguousarray(model.triangles, dtype="<u4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def _take(data: bytes, offset: int, nbytes: int, what: str):
    if offset + nbytes > len(data):
        raise TruncatedPayloadError(
            f"file ends inside {what}: need {nbytes} bytes at offset {offset}, "
            f"have {len(data) - offset}")
    return data[offset:offset + nbytes], offset + nbytes


def load_model(path) -> MorphableModel:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise MalformedHeaderError("bad magic bytes (not a model file)")
    off = len(MAGIC)
    raw, off = _take(data, off, 4, "metadata length")
    (meta_len,) = struct.unpack("<I", raw)
    raw, off = _take(data, off, meta_len, "metadata JSON")
    try:
        meta = json.loads(raw.decode("utf-8"))
        n = int(meta["N"])
        ks = int(meta["Ks"])
        ke = int(meta["Ke"])
        convention = str(meta.get("convention", "ibug68"))
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise MalformedHeaderError(f"unreadable metadata: {exc}") from exc
    if n < 1 or ks < 1 or ke < 1:
        raise MalformedHeaderError(f"nonpositive dimensions N={n} Ks={ks} Ke={ke}")

    def read_f32(count, what):
        nonlocal off
        raw, off2 = _take(data, off, 4 * count, what)
        off = off2
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    mean = read_f32(3 * n, "mean shape")
    shape_basis = read_f32(3 * n * ks, "shape basis").reshape(3 * n, ks)
    expr_basis = read_f32(3 * n * ke, "expression basis").reshape(3 * n, ke)
    sigma = read_f32(ke, "sigma")
    rest = len(data) - off
    if rest % 12 != 0:
        raise TruncatedPayloadError(
            f"triangle block has {rest} bytes, not a multiple of 12")
    tris = np.frombuffer(data[off:], dtype="<u4").reshape(-1, 3)
    bad = np.nonzero(tris >= n)[0]
    if bad.size:
        t = int(bad[0])
        raise DimensionInconsistencyError(
            f"triangle {t} = {tris[t].tolist()} references a vertex >= N={n}")
    if np.any(sigma <= 0):
        j = int(np.argmax(sigma <= 0))
        raise DimensionInconsistencyError(f"sigma[{j}] = {sigma[j]} is not positive")
    return MorphableModel(
        mean_shape=mean,
        shape_basis=shape_basis,
        expr_basis=expr_basis,
        expr_sigma=sigma,
        triangles=tris.astype(np.int32),
        convention=convention,
    )


def save_mapping(mapping: LandmarkMapping, path) -> None:
    """One vertex index per line; line i holds landmark i."""
    lines = "\n".join(str(int(v)) for v in mapping.vertex_indices)
    Path(path).write_text(lines + "\n", encoding="utf-8")


def load_mapping(path, convention: str = "ibug68") -> LandmarkMapping:
    text = Path(path).read_text(encoding="utf-8")
    idx = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            idx.append(int(line))
        except ValueError as exc:
            raise InvalidArgumentError(
                f"mapping line {lineno} is not an integer: {line!r}") from exc
    return LandmarkMapping(vertex_indices=np.asarray(idx, dtype=np.int64),
                           convention=convention)
