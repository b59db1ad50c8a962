import numpy as np
import pytest

from meshtucker.exceptions import DimensionMismatchError, RankError
from meshtucker.pca import (
    frames_as_rows,
    nearest_pca_components,
    pca_compress,
    pca_compression_ratio,
    pca_mean_overhead,
    pca_reconstruct,
    rows_as_frames,
)

from conftest import rel_err


def eig_tail_energy(x, p):
    """Tail eigenvalue sum of the unnormalized scatter matrix, via eigh."""
    rows = np.transpose(x, (2, 0, 1)).reshape(x.shape[2], -1)
    centred = rows - rows.mean(axis=0)
    # The F x F Gram matrix shares the non-zero spectrum of the scatter matrix.
    evals = np.sort(np.linalg.eigvalsh(centred @ centred.T))[::-1]
    return float(np.clip(evals[p:], 0.0, None).sum())


def test_row_layout_is_vertex_major(rng):
    x = rng.normal(size=(4, 3, 2))
    rows = frames_as_rows(x)
    assert rows.shape == (2, 12)
    np.testing.assert_array_equal(rows[1, 3:6], x[1, :, 1])
    np.testing.assert_array_equal(rows_as_frames(rows, x.shape).array, x)
    with pytest.raises(DimensionMismatchError):
        rows_as_frames(rows, (3, 3, 2))


def test_full_rank_is_exact(rng):
    x = rng.normal(size=(6, 3, 5))
    m = pca_compress(x, 5)
    assert rel_err(pca_reconstruct(m, x.shape).array, x) <= 1e-9


def test_identical_frames_need_one_component(rng):
    x = np.repeat(rng.normal(size=(8, 3, 1)), 6, axis=2)
    m = pca_compress(x, 1)
    assert rel_err(pca_reconstruct(m, x.shape).array, x) <= 1e-12


def test_zero_coefficients_give_mean_frame(rng):
    x = rng.normal(size=(5, 3, 4))
    m = pca_compress(x, 2)
    zeroed = type(m)(m.components, np.zeros_like(m.coefficients), m.mean, m.eigenvalues)
    out = pca_reconstruct(zeroed, x.shape).array
    mean_frame = x.mean(axis=2)
    for i in range(4):
        np.testing.assert_allclose(out[:, :, i], mean_frame, atol=1e-12)


def test_rank_two_mixture(rng):
    base = rng.normal(size=(10, 3))
    d1, d2 = rng.normal(size=(2, 10, 3))
    coeffs = rng.normal(size=(12, 2))
    x = np.stack([base + a * d1 + b * d2 for a, b in coeffs], axis=2)
    assert rel_err(pca_reconstruct(pca_compress(x, 2), x.shape).array, x) <= 1e-9
    assert rel_err(pca_reconstruct(pca_compress(x, 1), x.shape).array, x) > 1e-3


def test_tail_energy_matches_eigen_oracle(rng):
    x = rng.normal(size=(9, 3, 14))
    errors = []
    for p in range(1, 15):
        m = pca_compress(x, p)
        err2 = np.linalg.norm(pca_reconstruct(m, x.shape).array - x) ** 2
        oracle = eig_tail_energy(x, p)
        assert err2 == pytest.approx(oracle, rel=1e-8, abs=1e-10 * np.linalg.norm(x) ** 2)
        assert m.tail_energy == pytest.approx(oracle, rel=1e-8, abs=1e-10 * np.linalg.norm(x) ** 2)
        errors.append(err2)
    assert all(b <= a + 1e-9 for a, b in zip(errors, errors[1:]))


def test_matches_truncated_svd_oracle(rng):
    x = rng.normal(size=(7, 3, 10))
    rows = frames_as_rows(x)
    mean = rows.mean(axis=0)
    u, s, vt = np.linalg.svd(rows - mean, full_matrices=False)
    oracle = mean + (u[:, :3] * s[:3]) @ vt[:3]
    got = frames_as_rows(pca_reconstruct(pca_compress(x, 3), x.shape))
    assert rel_err(got, oracle) <= 1e-8


def test_components_orthonormal_and_sorted(rng):
    m = pca_compress(rng.normal(size=(8, 3, 9)), 4)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(4), atol=1e-8)
    assert np.all(np.diff(m.eigenvalues) <= 1e-12)


def test_rank_range():
    x = np.zeros((2, 3, 4))
    for p in (0, 5):
        with pytest.raises(RankError):
            pca_compress(x, p)


def test_compression_ratio():
    assert pca_compression_ratio(4, 8431, 48) == pytest.approx((25293 + 48) * 4 / 1214064)
    assert pca_compression_ratio(2, 10, 5) == pytest.approx(2 * pca_compression_ratio(1, 10, 5))
    assert pca_compression_ratio(5, 2, 5) > 1.0
    assert pca_mean_overhead(10, 5) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        pca_compression_ratio(0, 10, 5)


def test_nearest_components():
    unit = pca_compression_ratio(1, 1000, 50)
    assert nearest_pca_components(1000, 50, 7.2 * unit) == 7
    assert nearest_pca_components(1000, 50, 1e-9) == 1
    assert nearest_pca_components(1000, 50, 10.0) == 50
