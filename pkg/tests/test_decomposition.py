import numpy as np
import pytest

from meshtucker.decomposition import (
    TruncatedTucker,
    complete_basis,
    core_orthogonality_defect,
    core_slice_norms,
    hosvd,
    reconstruct,
    truncate,
)
from meshtucker.exceptions import DimensionMismatchError, RankError
from meshtucker.tensor import Tensor3, unfold

from conftest import rel_err


def _orth_error(u):
    return np.linalg.norm(u.T @ u - np.eye(u.shape[1]))


def test_full_rank_round_trip(rng):
    t = rng.normal(size=(5, 3, 7))
    op = hosvd(t)
    assert op.is_full
    assert rel_err(reconstruct(truncate(op, t.shape)).array, t) <= 1e-9
    for u in op.factors:
        assert _orth_error(u) <= 1e-8 * np.sqrt(u.shape[0])
    assert np.linalg.norm(op.core.array) == pytest.approx(np.linalg.norm(t), rel=1e-8)


def test_tall_mode_gets_completed_basis(rng):
    t = rng.normal(size=(40, 3, 4))
    op = hosvd(t)
    assert op.factors[0].shape == (40, 40)
    assert _orth_error(op.factors[0]) <= 1e-8 * np.sqrt(40)
    thin = hosvd(t, full_matrices=False)
    assert thin.factors[0].shape == (40, 12)
    for ranks in [(40, 3, 4), (20, 3, 2), (12, 3, 4)]:
        a = reconstruct(truncate(op, ranks)).array
        b = reconstruct(truncate(thin, ranks)).array
        np.testing.assert_allclose(a, b, atol=1e-10 * np.linalg.norm(t))


def test_complete_basis_is_deterministic_and_orthonormal(rng):
    u, _ = np.linalg.qr(rng.normal(size=(10, 3)))
    a = complete_basis(u, 7)
    b = complete_basis(u, 7)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[:, :3], u)
    assert _orth_error(a) <= 1e-12


def test_zero_tensor():
    op = hosvd(np.zeros((4, 3, 2)))
    assert not op.core.array.any()
    assert not reconstruct(truncate(op, (4, 3, 2))).array.any()
    assert core_orthogonality_defect(op, 1) == 0.0
    assert not core_slice_norms(op, 3).any()


def test_rank_one_tensor(rng):
    a, b, c = (rng.normal(size=n) for n in (6, 3, 5))
    t = np.einsum("i,j,k->ijk", a, b, c)
    op = hosvd(t)
    core = op.core.array
    expected = np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c)
    assert abs(core[0, 0, 0]) == pytest.approx(expected, rel=1e-12)
    rest = core.copy()
    rest[0, 0, 0] = 0.0
    assert np.abs(rest).max() <= 1e-9
    assert rel_err(reconstruct(truncate(op, (1, 1, 1))).array, t) <= 1e-9
    norms = core_slice_norms(op, 1)
    assert norms[0] == pytest.approx(expected, rel=1e-12)
    assert np.all(norms[1:] <= 1e-9)


@pytest.mark.parametrize("mode", [1, 2, 3])
def test_core_structure(rng, mode):
    t = rng.normal(size=(9, 3, 6))
    op = hosvd(t)
    assert core_orthogonality_defect(op, mode) <= 1e-8
    norms = core_slice_norms(op, mode)
    sv = np.linalg.svd(unfold(Tensor3(t), mode).data, compute_uv=False)
    np.testing.assert_allclose(norms[: len(sv)], sv, rtol=1e-8, atol=1e-12 * np.linalg.norm(t))
    assert np.all(np.diff(norms) <= 1e-10 * np.linalg.norm(t))


def test_defect_detects_correlated_slices():
    op = hosvd(np.zeros((2, 1, 1)))
    fake = type(op)(Tensor3(np.ones((2, 2, 1))), op.factors, op.singular_values, (2, 2, 1))
    assert core_orthogonality_defect(fake, 1) == pytest.approx(1.0, abs=1e-5)


def test_truncation_pythagoras_and_monotone(rng):
    t = rng.normal(size=(10, 3, 8))
    op = hosvd(t)
    norm2 = np.linalg.norm(t) ** 2
    errs = np.zeros((11, 9))
    for v in range(1, 11):
        for f in range(1, 9):
            tt = truncate(op, (v, 3, f))
            approx = reconstruct(tt).array
            e2 = np.linalg.norm(t - approx) ** 2
            assert e2 + np.linalg.norm(approx) ** 2 == pytest.approx(norm2, rel=1e-8)
            assert e2 == pytest.approx(norm2 - np.linalg.norm(tt.core.array) ** 2,
                                       rel=1e-8, abs=1e-10 * norm2)
            errs[v, f] = np.sqrt(e2)
    assert np.all(np.diff(errs[1:, 1:], axis=0) <= 1e-10)
    assert np.all(np.diff(errs[1:, 1:], axis=1) <= 1e-10)


def test_truncate_rejects_bad_ranks(rng):
    op = hosvd(rng.normal(size=(4, 3, 2)))
    for ranks in [(0, 3, 2), (5, 3, 2), (4, 3, 3), (4, 3)]:
        with pytest.raises(RankError):
            truncate(op, ranks)


def test_truncated_tucker_validates_shapes():
    with pytest.raises(DimensionMismatchError):
        TruncatedTucker(Tensor3.zeros((2, 3, 2)), (np.eye(4)[:, :2], np.eye(3), np.eye(5)[:, :3]),
                        (2, 3, 2), (4, 3, 5))
