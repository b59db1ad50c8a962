"""Animation I/O, the compressed container and the encode/decode pipeline.

Raw animation file (``.manm``), all little-endian::

    magic "MANM" | u16 version=1 | u16 reserved | u32 K | u32 F
    K*3*F float64 vertex coordinates, mode-1 fastest (vertex, then coordinate, then frame)
    u32 E | E pairs of u32 vertex indices

Compressed container (``.hsvz``), all little-endian::

    magic "HSVZ" | u16 version=1 | u16 flags (bit 0 reserved, must be 0)
    u32 K | u32 J | u32 F | u32 v | u32 r2 (=3) | u32 f
    u8 d_s (4 or 8) | u8 strategy | u8 metric | u8 reserved
    payload blocks of IEEE floats of width d_s, in order:
      U1 (K x v, row-major) | U2 (3 x 3, row-major) | U3 (F x f, row-major)
      core (v x 3 x f, mode-1 fastest) | transforms (F x 12, each a row-major 3x4)

The header fully determines the payload length,
``(v*K + 9 + f*F + 3*v*f + 12*F) * d_s`` bytes. The edge list is not stored.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import planning
from .decomposition import TruncatedTucker, TuckerOperator, hosvd, reconstruct, truncate
from .exceptions import (
    AssetParseError,
    ContainerFormatError,
    DimensionMismatchError,
    TopologyMismatchError,
    UnreachableRateError,
)
from .metrics import METRICS, evaluate
from .rigid import TransformSequence, apply_inverse_transforms, estimate_rigid_motion
from .tensor import Tensor3, as_tensor3

__all__ = [
    "AnimationSequence",
    "CompressedAnimation",
    "PreparedAnimation",
    "HEADER_SIZE",
    "prepare",
    "encode",
    "decode",
    "measured_cr",
    "load_animation",
    "save_raw",
    "load_raw",
    "load_obj_sequence",
    "save_obj_sequence",
    "edges_from_faces",
]

logger = logging.getLogger(__name__)

RAW_MAGIC = b"MANM"
RAW_VERSION = 1
_RAW_HEADER = struct.Struct("<4sHHII")

CONTAINER_MAGIC = b"HSVZ"
CONTAINER_VERSION = 1
_HEADER = struct.Struct("<4sHHIIIIIIBBBB")
HEADER_SIZE = _HEADER.size

STRATEGY_CODES = {"explicit": 0, "diagonal": 1, "iterative": 2}
METRIC_CODES = {"mse": 0, "hausdorff": 1, "msdm": 2}
_STRATEGY_NAMES = {v: k for k, v in STRATEGY_CODES.items()}
_METRIC_NAMES = {v: k for k, v in METRIC_CODES.items()}
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def edges_from_faces(faces) -> np.ndarray:
    """Unique undirected edges ``(i, j)``, ``i < j``, of polygon faces."""
    pairs = []
    for face in faces:
        n = len(face)
        for a in range(n):
            i, j = int(face[a]), int(face[(a + 1) % n])
            if i != j:
                pairs.append((min(i, j), max(i, j)))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.array(pairs, dtype=np.int64), axis=0)


@dataclass(frozen=True)
class AnimationSequence:
    """Vertex tensor ``K x 3 x F`` plus the constant mesh connectivity."""

    vertices: Tensor3
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    name: str = "animation"
    faces: np.ndarray | None = None

    def __post_init__(self):
        verts = as_tensor3(self.vertices)
        if verts.dims[1] != 3:
            raise DimensionMismatchError("vertex tensor must be K x 3 x F", 3, verts.dims[1])
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        k = verts.dims[0]
        if len(edges):
            if edges.min() < 0 or edges.max() >= k:
                raise TopologyMismatchError(f"edge index outside [0, {k})")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise TopologyMismatchError("self-loop in edge list")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        if self.faces is not None:
            object.__setattr__(self, "faces", np.asarray(self.faces, dtype=np.int64).reshape(-1, 3))

    @property
    def K(self) -> int:
        return self.vertices.dims[0]

    @property
    def F(self) -> int:
        return self.vertices.dims[2]


# -- raw format ---------------------------------------------------------------


def save_raw(anim: AnimationSequence, path) -> None:
    k, _, f = anim.vertices.dims
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(RAW_MAGIC, RAW_VERSION, 0, k, f))
        fh.write(anim.vertices.data.astype("<f8").tobytes())
        fh.write(struct.pack("<I", len(anim.edges)))
        fh.write(anim.edges.astype("<u4").tobytes())


def load_raw(path) -> AnimationSequence:
    blob = Path(path).read_bytes()
    if len(blob) < _RAW_HEADER.size:
        raise ContainerFormatError(f"{path}: file too short for a raw animation header")
    magic, version, _, k, f = _RAW_HEADER.unpack_from(blob)
    if magic != RAW_MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {magic!r}")
    if version != RAW_VERSION:
        raise ContainerFormatError(f"{path}: unsupported raw version {version}")
    pos = _RAW_HEADER.size
    n = k * 3 * f
    need = pos + 8 * n + 4
    if len(blob) < need:
        raise ContainerFormatError(f"{path}: truncated vertex block")
    data = np.frombuffer(blob, dtype="<f8", count=n, offset=pos)
    pos += 8 * n
    (n_edges,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if len(blob) != pos + 8 * n_edges:
        raise ContainerFormatError(f"{path}: edge block length mismatch")
    edges = np.frombuffer(blob, dtype="<u4", count=2 * n_edges, offset=pos).reshape(-1, 2)
    return AnimationSequence(Tensor3.from_data(data, (k, 3, f)), edges.astype(np.int64),
                             Path(path).stem)


# -- OBJ sequences ------------------------------------------------------------


def _parse_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    if len(parts) < 4:
                        raise ValueError("vertex needs three coordinates")
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    if len(parts) < 4:
                        raise ValueError("face needs at least three vertices")
                    idx = []
                    for token in parts[1:]:
                        i = int(token.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(verts) + i)
                    faces.append(tuple(idx))
            except ValueError as exc:
                raise AssetParseError(path, lineno, str(exc)) from None
    return np.array(verts, dtype=np.float64).reshape(-1, 3), faces


def _triangulate(polys):
    tris = [(p[0], p[i], p[i + 1]) for p in polys for i in range(1, len(p) - 1)]
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def load_obj_sequence(directory) -> AnimationSequence:
    """One Wavefront OBJ file per frame, ordered by file name."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".obj")
    if not files:
        raise FileNotFoundError(f"no .obj files in {directory}")
    frames = []
    ref_faces = None
    for path in files:
        verts, faces = _parse_obj(path)
        if frames and len(verts) != len(frames[0]):
            raise TopologyMismatchError(
                f"{path.name}: {len(verts)} vertices, first frame has {len(frames[0])}"
            )
        if ref_faces is None:
            ref_faces = faces
        elif faces and faces != ref_faces:
            raise TopologyMismatchError(f"{path.name}: face list differs from the first frame")
        frames.append(verts)
    arr = np.stack(frames, axis=2)
    k = arr.shape[0]
    for face in ref_faces:
        if min(face) < 0 or max(face) >= k:
            raise TopologyMismatchError(f"face {face} references a missing vertex")
    return AnimationSequence(Tensor3(arr), edges_from_faces(ref_faces), directory.name,
                             _triangulate(ref_faces) if ref_faces else None)


def save_obj_sequence(anim: AnimationSequence, directory, faces=None) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    faces = anim.faces if faces is None else faces
    width = max(4, len(str(anim.F - 1)))
    paths = []
    arr = anim.vertices.array
    for i in range(anim.F):
        path = directory / f"frame_{i:0{width}d}.obj"
        lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in arr[:, :, i]]
        if faces is not None:
            lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def load_animation(path, format=None) -> AnimationSequence:
    """Load an OBJ-sequence directory or a raw ``MANM`` file."""
    path = Path(path)
    if format is None:
        format = "obj-sequence" if path.is_dir() else "raw"
    if format == "obj-sequence":
        return load_obj_sequence(path)
    if format == "raw":
        return load_raw(path)
    raise ValueError(f"unknown animation format {format!r}")


# -- container ----------------------------------------------------------------


@dataclass(frozen=True)
class CompressedAnimation:
    """Truncated Tucker operator and transforms, held at storage precision."""

    K: int
    F: int
    v: int
    f: int
    ds: int
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    core: np.ndarray
    transforms: np.ndarray
    strategy: str = "explicit"
    metric: str = "mse"
    J: int = 3
    flags: int = 0

    def __post_init__(self):
        if self.ds not in _DTYPES:
            raise ContainerFormatError(f"d_s must be 4 or 8, got {self.ds}")
        if self.J != 3:
            raise ContainerFormatError(f"only J = 3 is supported, got {self.J}")
        if self.strategy not in STRATEGY_CODES or self.metric not in METRIC_CODES:
            raise ContainerFormatError(f"unknown strategy/metric {self.strategy}/{self.metric}")
        dtype = _DTYPES[self.ds]
        shapes = {
            "u1": (self.K, self.v),
            "u2": (3, 3),
            "u3": (self.F, self.f),
            "core": (self.v, 3, self.f),
            "transforms": (self.F, 12),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise DimensionMismatchError(f"container block {name}", shape, arr.shape)
            arr = arr.astype(dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def ranks(self) -> tuple[int, int, int]:
        return (self.v, 3, self.f)

    @property
    def payload_values(self) -> int:
        return (
            planning.tucker_storage(self.v, self.f, self.K, self.F, self.J)
            + planning.transform_storage(self.F)
        )

    @property
    def payload_bytes(self) -> int:
        return self.payload_values * self.ds

    def header_bytes(self) -> bytes:
        return _HEADER.pack(
            CONTAINER_MAGIC, CONTAINER_VERSION, self.flags,
            self.K, self.J, self.F, self.v, 3, self.f,
            self.ds, STRATEGY_CODES[self.strategy], METRIC_CODES[self.metric], 0,
        )

    def to_bytes(self) -> bytes:
        parts = [self.header_bytes()]
        for arr in (self.u1, self.u2, self.u3):
            parts.append(np.ascontiguousarray(arr).tobytes())
        parts.append(np.asarray(self.core).ravel(order="F").tobytes())
        parts.append(np.ascontiguousarray(self.transforms).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> CompressedAnimation:
        if len(blob) < HEADER_SIZE:
            raise ContainerFormatError("container shorter than its header")
        (magic, version, flags, k, j, f_count, v, r2, f, ds, strat, metric, _) = _HEADER.unpack_from(blob)
        if magic != CONTAINER_MAGIC:
            raise ContainerFormatError(f"bad magic {magic!r}")
        if version != CONTAINER_VERSION:
            raise ContainerFormatError(f"unsupported container version {version}")
        if flags != 0:
            raise ContainerFormatError(f"unsupported header flags {flags:#x}")
        if j != 3 or r2 != 3:
            raise ContainerFormatError(f"mode-2 size/rank must be 3, got {j}/{r2}")
        if ds not in _DTYPES:
            raise ContainerFormatError(f"bad precision {ds}")
        if strat not in _STRATEGY_NAMES or metric not in _METRIC_NAMES:
            raise ContainerFormatError("bad strategy or metric tag")
        if not (1 <= v <= k and 1 <= f <= f_count):
            raise ContainerFormatError(f"ranks ({v}, {f}) inconsistent with dims ({k}, {f_count})")
        dtype = _DTYPES[ds]
        sizes = [k * v, 9, f_count * f, v * 3 * f, f_count * 12]
        expected = HEADER_SIZE + sum(sizes) * ds
        if len(blob) != expected:
            raise ContainerFormatError(
                f"payload length mismatch: expected {expected} bytes, got {len(blob)}"
            )
        pos = HEADER_SIZE
        blocks = []
        for n in sizes:
            blocks.append(np.frombuffer(blob, dtype=dtype, count=n, offset=pos))
            pos += n * ds
        return cls(
            K=k, F=f_count, v=v, f=f, ds=ds,
            u1=blocks[0].reshape(k, v),
            u2=blocks[1].reshape(3, 3),
            u3=blocks[2].reshape(f_count, f),
            core=blocks[3].reshape((v, 3, f), order="F"),
            transforms=blocks[4].reshape(f_count, 12),
            strategy=_STRATEGY_NAMES[strat],
            metric=_METRIC_NAMES[metric],
            flags=flags,
        )

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> CompressedAnimation:
        return cls.from_bytes(Path(path).read_bytes())

    def truncated_tucker(self) -> TruncatedTucker:
        factors = tuple(np.asarray(u, dtype=np.float64) for u in (self.u1, self.u2, self.u3))
        return TruncatedTucker(
            Tensor3(np.asarray(self.core, dtype=np.float64)), factors, self.ranks, (self.K, 3, self.F)
        )

    def transform_sequence(self) -> TransformSequence:
        return TransformSequence.from_array(np.asarray(self.transforms, dtype=np.float64))


def is_container(path) -> bool:
    path = Path(path)
    if not path.is_file():
        return False
    with open(path, "rb") as fh:
        return fh.read(4) == CONTAINER_MAGIC


# -- pipeline -----------------------------------------------------------------


def overhead_cr(K, F, ds, J=3) -> float:
    """Transforms plus header, in compression-ratio units."""
    return planning.transform_storage(F) / (K * F * J) + HEADER_SIZE / (K * F * J * ds)


@dataclass
class PreparedAnimation:
    """Motion-normalized animation and its full HO-SVD, reusable across rates."""

    original: Tensor3
    normalized: Tensor3
    transforms: TransformSequence
    operator: TuckerOperator
    edges: np.ndarray
    faces: np.ndarray | None = None

    @property
    def K(self) -> int:
        return self.original.dims[0]

    @property
    def F(self) -> int:
        return self.original.dims[2]

    def reconstruct(self, v, f) -> Tensor3:
        x = reconstruct(truncate(self.operator, (v, 3, f)))
        return apply_inverse_transforms(x, self.transforms)

    def error(self, v, f, metric="mse") -> float:
        (report,) = evaluate(self.original, self.reconstruct(v, f), (metric,), self.edges, self.faces)
        return report.aggregate

    def candidates(self, target_cr, delta=planning.DEFAULT_DELTA):
        return planning.enumerate_candidates(self.K, self.F, target_cr, delta)

    def plan(self, target_cr, strategy="diagonal", metric="mse", delta=planning.DEFAULT_DELTA,
             n_samples=planning.DEFAULT_SAMPLES, depth_limit=planning.DEFAULT_DEPTH):
        cands = self.candidates(target_cr, delta)
        if len(cands) == 0:
            raise UnreachableRateError(planning.unreachable_message(self.K, self.F, target_cr, delta))
        if strategy == "diagonal":
            return planning.diagonal_plan(cands)
        if strategy == "iterative":
            return planning.iterative_plan(
                cands, lambda v, f: self.error(v, f, metric), n_samples, depth_limit
            )
        raise ValueError(f"unknown strategy {strategy!r}")

    def compress(self, plan: planning.CompressionPlan, ds=4, metric="mse") -> CompressedAnimation:
        tt = truncate(self.operator, plan.ranks)
        return CompressedAnimation(
            K=self.K, F=self.F, v=plan.v, f=plan.f, ds=ds,
            u1=tt.factors[0], u2=tt.factors[1], u3=tt.factors[2],
            core=tt.core.array,
            transforms=self.transforms.as_array(),
            strategy=plan.strategy, metric=metric,
        )


def prepare(anim) -> PreparedAnimation:
    """Rigid-motion normalization followed by a thin HO-SVD."""
    if not isinstance(anim, AnimationSequence):
        anim = AnimationSequence(as_tensor3(anim))
    x, transforms = estimate_rigid_motion(anim.vertices)
    op = hosvd(x, full_matrices=False)
    return PreparedAnimation(anim.vertices, x, transforms, op, anim.edges, anim.faces)


def encode(anim, target_cr=None, strategy="diagonal", metric="mse", ds=4,
           delta=planning.DEFAULT_DELTA, n_samples=planning.DEFAULT_SAMPLES,
           depth_limit=planning.DEFAULT_DEPTH, ranks=None, count_overhead=False,
           prepared=None) -> CompressedAnimation:
    """Compress an animation.

    The rate target ``target_cr`` applies to the truncated Tucker operator;
    with ``count_overhead=True`` it also covers the transforms and header,
    so the whole container lands within ``delta`` of it. ``ranks=(v, f)``
    bypasses rank selection.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    prep = prepared if prepared is not None else prepare(anim)
    if ranks is not None:
        plan = planning.explicit_plan(ranks[0], ranks[1], prep.K, prep.F)
    else:
        if target_cr is None:
            raise ValueError("encode needs target_cr or ranks")
        lam = target_cr - overhead_cr(prep.K, prep.F, ds) if count_overhead else target_cr
        if lam <= 0:
            raise UnreachableRateError(
                f"target CR {target_cr:.6g} does not cover the transform overhead"
            )
        plan = prep.plan(lam, strategy, metric, delta, n_samples, depth_limit)
    logger.info("plan v=%d f=%d cr=%.6g (%s)", plan.v, plan.f, plan.achieved_cr, plan.strategy)
    return prep.compress(plan, ds, metric)


def decode(c: CompressedAnimation) -> Tensor3:
    """Reconstruct the animation stored in a container."""
    x = reconstruct(c.truncated_tucker())
    return apply_inverse_transforms(x, c.transform_sequence())


def measured_cr(c: CompressedAnimation, anim=None) -> float:
    """Container size (header included) over the raw size at the same precision."""
    if anim is not None:
        dims = anim.vertices.dims if isinstance(anim, AnimationSequence) else as_tensor3(anim).dims
        if dims != (c.K, 3, c.F):
            raise DimensionMismatchError("animation dims", (c.K, 3, c.F), dims)
    return len(c.to_bytes()) / (c.K * c.F * c.J * c.ds)

