import warnings

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from meshtucker.exceptions import SingularTransformError
from meshtucker.rigid import (
    DegenerateGeometryWarning,
    FrameTransform,
    TransformSequence,
    apply_inverse_transforms,
    apply_transforms,
    estimate_rigid_motion,
)
from meshtucker.synth import torus_mesh

from conftest import rel_err


def _moving(rng, base, n_frames):
    rots = Rotation.random(n_frames, random_state=rng).as_matrix()
    shifts = rng.normal(size=(n_frames, 3))
    rots[0], shifts[0] = np.eye(3), 0.0
    frames = np.stack([base @ r.T + b for r, b in zip(rots, shifts)], axis=2)
    return frames, rots, shifts


def test_static_animation_gives_identity(rng):
    base = rng.normal(size=(20, 3))
    t = np.repeat(base[:, :, None], 5, axis=2)
    x, r = estimate_rigid_motion(t)
    np.testing.assert_allclose(r.as_array(), np.tile(FrameTransform.identity().matrix.ravel(), (5, 1)),
                               atol=1e-12)
    np.testing.assert_allclose(x.array, t, atol=1e-12)


def test_known_rotations_are_recovered(rng):
    base = rng.normal(size=(30, 3))
    t, rots, shifts = _moving(rng, base, 8)
    x, r = estimate_rigid_motion(t)
    for i in range(8):
        np.testing.assert_allclose(r[i].linear, rots[i], atol=1e-8)
        np.testing.assert_allclose(r[i].translation, shifts[i], atol=1e-8)
        np.testing.assert_allclose(x.array[:, :, i], base, atol=1e-8)
    np.testing.assert_array_equal(x.array[:, :, 0], t[:, :, 0])


def test_symmetric_deformation_leaves_motion_identity():
    base, _, u, v = torus_mesh(12 * 6)
    normals = np.column_stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)])
    # cos(4u) respects the torus symmetries, so the affine fit stays identity.
    bump = 0.05 * np.cos(4 * u)[:, None] * normals
    t = np.stack([base, base + bump, base + 2 * bump], axis=2)
    x, r = estimate_rigid_motion(t)
    for tr in r:
        np.testing.assert_allclose(tr.matrix, FrameTransform.identity().matrix, atol=1e-6)
    np.testing.assert_allclose(x.array, t, atol=1e-6)


def test_round_trip(rng):
    t = rng.normal(size=(25, 3, 6)) + np.linspace(0, 3, 6)
    x, r = estimate_rigid_motion(t)
    assert rel_err(apply_inverse_transforms(x, r).array, t) <= 1e-9
    np.testing.assert_allclose(apply_transforms(t, r).array, x.array, atol=1e-10)


def test_single_translation_shifted_back():
    tr = FrameTransform(np.hstack([np.eye(3), [[1.0], [2.0], [3.0]]]))
    pts = np.arange(12, dtype=float).reshape(4, 3)
    r = TransformSequence((FrameTransform.identity(), tr))
    x = np.stack([pts, pts], axis=2)
    out = apply_inverse_transforms(x, r).array
    np.testing.assert_array_equal(out[:, :, 1], pts + [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(apply_transforms(out, r).array, x)


def test_rigid_animation_normalizes_to_constant(rng):
    base, _, _, _ = torus_mesh(60)
    t, _, _ = _moving(rng, base, 10)
    x, _ = estimate_rigid_motion(t)
    ref = x.array[:, :, 0]
    worst = max(np.linalg.norm(x.array[:, :, i] - ref) for i in range(10))
    assert worst <= 1e-7 * np.linalg.norm(ref)


def test_equivariance(rng):
    base = rng.normal(size=(15, 3))
    t, _, _ = _moving(rng, base, 4)
    q = Rotation.random(random_state=rng).as_matrix()
    rotated = np.einsum("kjf,lj->klf", t, q)
    x1, _ = estimate_rigid_motion(t)
    x2, _ = estimate_rigid_motion(rotated)
    np.testing.assert_allclose(np.einsum("kjf,lj->klf", x1.array, q), x2.array, atol=1e-9)


def test_coplanar_base_falls_back_to_translation(rng):
    base = np.column_stack([rng.normal(size=(10, 2)), np.zeros(10)])
    t = np.stack([base, base + [0.5, 0.0, 1.0]], axis=2)
    with pytest.warns(DegenerateGeometryWarning):
        x, r = estimate_rigid_motion(t)
    assert r.degenerate_frames == (1,)
    np.testing.assert_allclose(r[1].translation, [0.5, 0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(x.array[:, :, 1], base, atol=1e-12)


def test_no_warning_on_regular_input(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        estimate_rigid_motion(rng.normal(size=(10, 3, 3)))


def test_singular_transform_names_frame():
    bad = np.zeros((3, 4))
    r = TransformSequence.from_array(np.vstack([FrameTransform.identity().matrix.ravel(),
                                                bad.ravel()]))
    with pytest.raises(SingularTransformError) as info:
        apply_inverse_transforms(np.zeros((4, 3, 2)), r)
    assert info.value.frame == 1


def test_needs_four_vertices(rng):
    with pytest.raises(ValueError):
        estimate_rigid_motion(rng.normal(size=(3, 3, 2)))


def test_transform_sequence_array_round_trip(rng):
    arr = rng.normal(size=(3, 12))
    np.testing.assert_array_equal(TransformSequence.from_array(arr).as_array(), arr)
