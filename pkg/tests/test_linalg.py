import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gquasi.linalg import (
    adjugate,
    det,
    inv,
    mat_exp,
    polar_svd,
    random_rotation,
    rank_one,
    singular_values,
)

entries = st.floats(-5, 5, allow_nan=False, width=64)


def matrices(n):
    return arrays(np.float64, (n, n), elements=entries)


# --- frozen examples ---------------------------------------------------------

def test_det_examples():
    assert det(np.eye(3)) == 1.0
    assert det(np.diag([2.0, 0.5])) == 1.0
    assert det(np.eye(2) + 5.0 * rank_one(np.array([1.0, 0]), np.array([0, 1.0]))) == 1.0


def test_mat_exp_examples():
    np.testing.assert_array_equal(mat_exp(np.zeros((3, 3))), np.eye(3))
    X = rank_one(np.array([1.0, 0]), np.array([0, 1.0]))
    np.testing.assert_allclose(mat_exp(X), np.eye(2) + X, atol=1e-15)
    np.testing.assert_allclose(mat_exp(np.diag([np.log(2.0), 0.0])), np.diag([2.0, 1.0]), rtol=1e-14)


def test_polar_examples():
    d = polar_svd(np.diag([3.0, 2.0]))
    np.testing.assert_allclose(d.sigma, [3.0, 2.0])
    np.testing.assert_allclose(d.rotation, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(d.stretch, np.diag([3.0, 2.0]), atol=1e-14)

    c, s = np.cos(0.7), np.sin(0.7)
    d = polar_svd(np.array([[c, -s], [s, c]]))
    np.testing.assert_allclose(d.sigma, [1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(d.stretch, np.eye(2), atol=1e-14)

    np.testing.assert_allclose(singular_values(np.array([[0.0, -2.0], [1.0, 0.0]])), [2.0, 1.0],
                               atol=1e-14)


def test_rank_one_examples():
    np.testing.assert_array_equal(rank_one(np.array([1.0, 0]), np.array([0, 1.0])), [[0, 1], [0, 0]])
    np.testing.assert_array_equal(rank_one(np.zeros(2), np.array([3.0, 4.0])), np.zeros((2, 2)))
    np.testing.assert_array_equal(rank_one(np.array([1.0, 2.0]), np.array([3.0, 4.0])),
                                  [[3, 4], [6, 8]])


def test_polar_negative_determinant_convention():
    F = np.diag([2.0, -1.0, 0.5])
    d = polar_svd(F)
    assert np.linalg.det(d.rotation) == pytest.approx(-1.0)
    assert np.all(np.linalg.eigvalsh(d.stretch) >= -1e-14)
    np.testing.assert_allclose(d.rotation @ d.stretch, F, atol=1e-14)


def test_polar_rejects_nonfinite():
    with pytest.raises(ValueError):
        polar_svd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


# --- properties --------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4])
def test_det_and_inverse_match_numpy(n, rng):
    F = rng.standard_normal((500, n, n))
    np.testing.assert_allclose(det(F), np.linalg.det(F), rtol=1e-12, atol=1e-12)
    good = np.abs(np.linalg.det(F)) > 1e-2
    np.testing.assert_allclose(inv(F[good]), np.linalg.inv(F[good]), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(adjugate(F) @ F,
                               det(F)[:, None, None] * np.eye(n), atol=1e-11)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_det_exp_is_exp_trace(n, rng):
    H = rng.standard_normal((1000, n, n))
    H *= 3.0 / np.linalg.norm(H, axis=(1, 2), keepdims=True) * rng.uniform(0, 1, (1000, 1, 1))
    np.testing.assert_allclose(det(mat_exp(H)), np.exp(np.trace(H, axis1=1, axis2=2)), rtol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_polar_reconstruction(n, rng):
    F = rng.standard_normal((1000, n, n))
    F[np.linalg.det(F) < 0, 0] *= -1.0
    d = polar_svd(F)
    scale = np.linalg.norm(F, axis=(1, 2))
    err = np.linalg.norm(d.rotation @ d.stretch - F, axis=(1, 2))
    assert np.all(err <= 1e-10 * scale)
    np.testing.assert_allclose(det(d.rotation), 1.0, atol=1e-12)
    np.testing.assert_allclose(d.sigma, np.linalg.svd(F, compute_uv=False), rtol=1e-12, atol=1e-13)
    assert np.all(np.diff(d.sigma, axis=-1) <= 0)


def test_exp_of_orthogonal_rank_one_is_affine(rng):
    for n in (2, 3, 4):
        a = rng.standard_normal((200, n))
        b = rng.standard_normal((200, n))
        b -= np.sum(a * b, axis=1, keepdims=True) / np.sum(a * a, axis=1, keepdims=True) * a
        t = rng.uniform(-2, 2, (200, 1, 1))
        X = rank_one(a, b)
        np.testing.assert_allclose(mat_exp(t * X), np.eye(n) + t * X, atol=1e-12)


@given(matrices(3))
def test_svd_matches_numpy(F):
    np.testing.assert_allclose(singular_values(F), np.linalg.svd(F, compute_uv=False),
                               atol=1e-12 * (1 + np.abs(F).max()))


@given(arrays(np.float64, 3, elements=entries), arrays(np.float64, 3, elements=entries))
def test_rank_one_has_rank_at_most_one(a, b):
    s = np.linalg.svd(rank_one(a, b), compute_uv=False)
    assert s[1] <= 1e-12 * max(np.linalg.norm(a) * np.linalg.norm(b), 1e-300)


def test_random_rotation_is_orthogonal(rng):
    Q = random_rotation(rng, 3, 50)
    np.testing.assert_allclose(Q @ np.swapaxes(Q, 1, 2), np.broadcast_to(np.eye(3), Q.shape), atol=1e-13)
    np.testing.assert_allclose(det(Q), 1.0)
