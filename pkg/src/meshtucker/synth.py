"""Deterministic synthetic animations built on a triangulated torus.

Kinds
-----
``rigid``
    The base mesh under random per-frame rotations and translations.
``lowrank``
    A deformation of known multilinear rank ``(r1, 3, r3)`` in frame-0
    coordinates, optionally carried by rigid motion. The deformation fields
    are orthogonal to the affine span of the base mesh, so motion
    normalization recovers the deformed frames exactly.
``bulge``
    A Gaussian bump travelling around the torus along the surface normals,
    a smooth non-rigid stressor that is far from low rank.
``mixed``
    Low-rank deformation plus a weaker bulge plus rigid motion.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from .codec import AnimationSequence, edges_from_faces
from .tensor import Tensor3

__all__ = ["KINDS", "torus_grid", "torus_mesh", "synthesize"]

KINDS = ("rigid", "lowrank", "bulge", "mixed")

MAJOR_RADIUS = 1.0
MINOR_RADIUS = 0.4


def torus_grid(K):
    """Factor ``K = n_u * n_v`` with both sides at least 3, ``n_u / n_v`` near 2.5."""
    best = None
    for n_v in range(3, K // 3 + 1):
        if K % n_v:
            continue
        n_u = K // n_v
        if n_u < 3:
            continue
        score = abs(np.log(n_u / n_v / 2.5))
        if best is None or score < best[0]:
            best = (score, n_u, n_v)
    if best is None:
        raise ValueError(f"K = {K} cannot be laid out as an n_u x n_v torus grid with sides >= 3")
    return best[1], best[2]


def torus_mesh(K):
    """Vertices ``K x 3``, triangles, and the grid parameters ``(u, v)``."""
    n_u, n_v = torus_grid(K)
    u = np.repeat(np.arange(n_u) * 2 * np.pi / n_u, n_v)
    v = np.tile(np.arange(n_v) * 2 * np.pi / n_v, n_u)
    ring = MAJOR_RADIUS + MINOR_RADIUS * np.cos(v)
    verts = np.column_stack([ring * np.cos(u), ring * np.sin(u), MINOR_RADIUS * np.sin(v)])
    idx = np.arange(K).reshape(n_u, n_v)
    a = idx
    b = np.roll(idx, -1, axis=0)
    c = np.roll(np.roll(idx, -1, axis=0), -1, axis=1)
    d = np.roll(idx, -1, axis=1)
    faces = np.concatenate([
        np.column_stack([a.ravel(), b.ravel(), c.ravel()]),
        np.column_stack([a.ravel(), c.ravel(), d.ravel()]),
    ])
    return verts, faces, u, v


def _torus_normals(u, v):
    return np.column_stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)])


def _rigid_motion(rng, F, scale=0.5):
    rots = Rotation.random(F, random_state=rng).as_matrix()
    shifts = rng.normal(scale=scale, size=(F, 3))
    rots[0] = np.eye(3)
    shifts[0] = 0.0
    return rots, shifts


def _apply_motion(frames, rots, shifts):
    out = np.empty_like(frames)
    for i in range(frames.shape[2]):
        out[:, :, i] = frames[:, :, i] @ rots[i].T + shifts[i]
    return out


def _deformation_fields(base, u, v, n):
    """``n`` orthonormal smooth fields orthogonal to ``[1, base]``."""
    K = len(base)
    raw = []
    for m in range(1, n + 8):
        raw.append(np.cos(m * u) * np.sin(v + m))
        raw.append(np.sin(m * u + 0.5 * m) * np.cos(2 * v))
    span = np.column_stack([np.ones(K), base] + raw)
    q, r = np.linalg.qr(span)
    keep = np.abs(np.diag(r)) > 1e-8 * np.abs(r[0, 0])
    q = q[:, keep]
    if q.shape[1] < 4 + n:
        raise ValueError(f"mesh too small for {n} deformation fields")
    return q[:, 4 : 4 + n]


def _lowrank_deformation(rng, base, u, v, F, r1, r3, amplitude):
    d = r1 - 3
    if r3 == 1:
        return np.repeat(base[:, :, None], F, axis=2)
    fields = _deformation_fields(base, u, v, d)
    t = np.arange(F) / max(F - 1, 1)
    # w_m(0) = 0 keeps frame 0 equal to the base mesh.
    weights = np.column_stack([np.sin(np.pi * m * t * 0.9) for m in range(1, r3)])
    modes = rng.normal(size=(r3 - 1, d, 3))
    scale = amplitude * np.linalg.norm(base)
    frames = np.repeat(base[:, :, None], F, axis=2).copy()
    for i in range(F):
        coeff = np.tensordot(weights[i], modes, axes=1) * scale
        frames[:, :, i] += fields @ coeff
    return frames


def _bulge(base, u, v, F, amplitude):
    normals = _torus_normals(u, v)
    frames = np.repeat(base[:, :, None], F, axis=2).copy()
    for i in range(1, F):
        t = i / max(F - 1, 1)
        centre = 2 * np.pi * t
        du = np.angle(np.exp(1j * (u - centre)))
        dv = np.angle(np.exp(1j * v))
        bump = np.exp(-(du**2 / 0.3 + dv**2 / 0.8))
        frames[:, :, i] += amplitude * MINOR_RADIUS * bump[:, None] * normals
    return frames


def _check_ranks(K, F, r1, r3):
    if not 3 <= r1 <= K:
        raise ValueError(f"r1 must lie in [3, K], got {r1}")
    if not 1 <= r3 <= F:
        raise ValueError(f"r3 must lie in [1, F], got {r3}")
    # After normalization the mode-1 span holds the base mesh (3 columns)
    # plus the deformation fields, and each frame varies only through them.
    if (r1 == 3) != (r3 == 1):
        raise ValueError("r1 = 3 and r3 = 1 imply each other for a normalized animation")
    if r3 - 1 > 3 * (r1 - 3):
        raise ValueError(f"r3 - 1 = {r3 - 1} exceeds 3 * (r1 - 3) = {3 * (r1 - 3)}")
    if r1 - 3 > 3 * (r3 - 1):
        raise ValueError(f"r1 - 3 = {r1 - 3} exceeds 3 * (r3 - 1) = {3 * (r3 - 1)}")


def synthesize(kind, K=500, F=60, ranks=(6, 4), amplitude=0.1, seed=0, motion=True,
               name=None) -> AnimationSequence:
    """Build a synthetic animation; identical arguments give identical output."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if F < 1:
        raise ValueError(f"F must be positive, got {F}")
    if amplitude < 0:
        raise ValueError(f"amplitude must be non-negative, got {amplitude}")
    rng = np.random.default_rng(seed)
    base, faces, u, v = torus_mesh(K)
    r1, r3 = (int(r) for r in ranks)
    if kind in ("lowrank", "mixed"):
        _check_ranks(K, F, r1, r3)

    if kind == "rigid":
        frames = np.repeat(base[:, :, None], F, axis=2)
        motion = True
    elif kind == "lowrank":
        frames = _lowrank_deformation(rng, base, u, v, F, r1, r3, amplitude)
    elif kind == "bulge":
        frames = _bulge(base, u, v, F, amplitude)
    else:
        frames = _lowrank_deformation(rng, base, u, v, F, r1, r3, amplitude)
        frames += _bulge(base, u, v, F, 0.5 * amplitude) - base[:, :, None]
        motion = True
    if motion:
        rots, shifts = _rigid_motion(rng, F)
        frames = _apply_motion(frames, rots, shifts)
    return AnimationSequence(Tensor3(frames), edges_from_faces(faces), name or f"{kind}-{seed}",
                             faces)
