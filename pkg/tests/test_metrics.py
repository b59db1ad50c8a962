import io

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from meshtucker.exceptions import DimensionMismatchError, TopologyMismatchError
from meshtucker.metrics import (
    DistortionReport,
    MeshWindows,
    directed_hausdorff,
    evaluate,
    hausdorff,
    hausdorff_report,
    msdm,
    msdm_report,
    mse,
    reports_to_csv,
)
from meshtucker.synth import torus_mesh
from meshtucker.codec import edges_from_faces


def brute_hausdorff(a, b):
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


@pytest.fixture(scope="module")
def torus():
    verts, faces, u, v = torus_mesh(20 * 8)
    return verts, faces, edges_from_faces(faces), u, v


def test_mse_hand_cases():
    a = np.zeros((1, 3, 1))
    b = a.copy()
    b[0, 0, 0] = 3.0
    assert mse(a, b).per_frame.tolist() == [3.0]
    t = np.arange(12, dtype=float).reshape(2, 3, 2)
    assert mse(t, t).aggregate == 0.0
    assert mse(t, t + 0.5).per_frame.tolist() == [0.25, 0.25]
    c = t.copy()
    c[1, 2, 1] += 6.0
    np.testing.assert_array_equal(mse(t, c).per_frame, [0.0, 6.0])
    assert mse(t, c).aggregate == 3.0
    d = t.copy()
    d[:, :, 0] -= 1.0
    d[:, :, 1] += 2.0
    assert mse(t, d).aggregate == 2.5


def test_mse_dims_must_match():
    with pytest.raises(DimensionMismatchError):
        mse(np.zeros((2, 3, 2)), np.zeros((2, 3, 3)))


def test_hausdorff_small_cases():
    assert hausdorff(np.zeros((1, 3)), np.zeros((1, 3))) == 0.0
    assert hausdorff([[0, 0, 0]], [[1, 0, 0]]) == 1.0
    assert hausdorff([[0, 0, 0], [2, 0, 0]], [[0, 0, 0]]) == 2.0
    assert directed_hausdorff([[0, 0, 0]], [[0, 0, 0], [2, 0, 0]]) == 0.0
    with pytest.raises(ValueError):
        hausdorff(np.zeros((0, 3)), np.zeros((1, 3)))


@pytest.mark.parametrize("n", [1, 2, 17, 200])
def test_hausdorff_matches_brute_force(rng, n):
    for _ in range(5):
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(max(1, n // 2 + 3), 3))
        assert hausdorff(a, b) == brute_hausdorff(a, b)
        assert hausdorff(a, b) == hausdorff(b, a)


def test_scaling(rng):
    a = rng.normal(size=(30, 3, 2))
    b = a + 0.1 * rng.normal(size=a.shape)
    s = 2.5
    assert mse(s * a, s * b).aggregate == pytest.approx(s * s * mse(a, b).aggregate, rel=1e-12)
    assert hausdorff_report(s * a, s * b).aggregate == pytest.approx(
        s * hausdorff_report(a, b).aggregate, rel=1e-12)


def test_report_aggregation():
    r = DistortionReport.from_frames("hausdorff", [1.0, 3.0, 2.0])
    assert (r.aggregate, r.aggregation) == (3.0, "max")
    r = DistortionReport.from_frames("msdm", [0.2, 0.4])
    assert r.aggregate == pytest.approx(0.3)
    assert r.aggregation == "mean"


def test_msdm_identical_is_zero(torus):
    verts, faces, edges, _, _ = torus
    assert msdm(verts, verts, edges, faces) == 0.0
    assert msdm(verts, verts, edges) == 0.0


def test_msdm_bounded_on_random_perturbations(torus, rng):
    verts, faces, edges, _, _ = torus
    for scale in [1e-3, 1e-2, 0.1, 1.0, 10.0]:
        noisy = verts + scale * rng.normal(size=verts.shape)
        value = msdm(verts, noisy, edges, faces)
        assert 0.0 <= value <= 1.0


def test_msdm_monotone_in_amplitude(torus):
    verts, faces, edges, u, v = torus
    normals = np.column_stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)])
    field = (np.cos(3 * u) * np.sin(2 * v))[:, None] * normals
    eps = 0.01
    values = [msdm(verts, verts + k * eps * field, edges, faces) for k in range(3)]
    assert values[0] == 0.0
    assert values[0] <= values[1] <= values[2]


def test_msdm_rigid_invariant(torus, rng):
    verts, faces, edges, _, _ = torus
    other = verts + 0.02 * rng.normal(size=verts.shape)
    base = msdm(verts, other, edges, faces)
    q = Rotation.random(random_state=rng).as_matrix()
    b = rng.normal(size=3)
    moved = msdm(verts @ q.T + b, other @ q.T + b, edges, faces)
    assert moved == pytest.approx(base, abs=1e-6)
    assert msdm(verts @ q.T + b, other @ q.T + b, edges) == pytest.approx(
        msdm(verts, other, edges), abs=1e-6)


def test_msdm_excludes_degenerate_windows(torus):
    verts, faces, edges, _, _ = torus
    squashed = verts.copy()
    squashed[faces[0]] = squashed[faces[0][0]]
    value, excluded = msdm(squashed, squashed, edges, faces, return_excluded=True)
    assert value == 0.0
    assert len(excluded) > 0


def test_msdm_topology_checks(torus):
    verts, faces, edges, _, _ = torus
    with pytest.raises(TopologyMismatchError):
        msdm(verts, verts[:-1], edges)
    windows = MeshWindows.build(10, np.array([[0, 1]]))
    with pytest.raises(TopologyMismatchError):
        msdm(verts, verts, windows=windows)
    with pytest.raises(TopologyMismatchError):
        evaluate(np.zeros((4, 3, 1)), np.zeros((4, 3, 1)), ("msdm",))


def test_evaluate_and_csv(torus):
    verts, faces, edges, _, _ = torus
    t = np.stack([verts, verts * 1.01], axis=2)
    reports = evaluate(t, t, ("mse", "hausdorff", "msdm"), edges, faces)
    assert [r.metric for r in reports] == ["mse", "hausdorff", "msdm"]
    assert all(r.aggregate == 0.0 for r in reports)
    text = reports_to_csv(reports)
    lines = text.splitlines()
    assert lines[0] == "# meshtucker-evaluate v1"
    assert lines[1] == "metric,frame,value"
    assert lines[2:5] == ["mse,0,0.0", "mse,1,0.0", "mse,mean,0.0"]
    assert lines[5:8] == ["hausdorff,0,0.0", "hausdorff,1,0.0", "hausdorff,max,0.0"]
    buf = io.StringIO()
    assert reports_to_csv(reports, buf) == ""
    assert buf.getvalue() == text


def test_msdm_report_per_frame(torus):
    verts, faces, edges, _, _ = torus
    t = np.stack([verts, verts], axis=2)
    r = t.copy()
    r[:, :, 1] += 0.05 * np.sin(np.arange(len(verts)))[:, None]
    rep = msdm_report(t, r, edges, faces)
    assert rep.per_frame[0] == 0.0
    assert 0.0 < rep.per_frame[1] <= 1.0
