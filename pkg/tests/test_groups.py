import numpy as np
import pytest

from gquasi.groups import (
    ConstraintError,
    GroupSpec,
    group,
    in_algebra,
    in_group,
    project_algebra,
    sample_algebra,
    sample_group_element,
    sample_rank_one_cone,
    sample_rank_one_pairs,
    conjugate_potential,
)
from gquasi.linalg import mat_exp, rank_one
from gquasi.potentials import Potential, builtin

ALL = [group(g, n) for g in ("gl", "gl+", "sl", "so", "co") for n in (2, 3, 4)] + [
    group("sp", 2), group("sp", 4)]


def trace_potential():
    return Potential("trace", "GLn", lambda F: np.trace(F, axis1=-2, axis2=-1))


def test_group_spec_validation():
    with pytest.raises(ValueError):
        GroupSpec("SPn", 3)
    with pytest.raises(ValueError):
        GroupSpec("Lorentz", 2)
    with pytest.raises(ValueError):
        group("gl", 5)
    assert str(group("gl+", 3)) == "gl+(3)"


def test_membership_examples():
    assert in_group(group("sl", 2), np.diag([2.0, 0.5]), 1e-9)
    assert not in_group(group("gl+", 2), np.diag([1.0, -1.0]))
    c, s = np.cos(0.3), np.sin(0.3)
    assert in_group(group("so", 2), np.array([[c, -s], [s, c]]), 1e-9)
    assert in_group(group("co", 2), 3.0 * np.array([[c, -s], [s, c]]))
    assert not in_group(group("co", 2), np.diag([3.0, 2.0]))


def test_algebra_examples():
    G = group("sl", 2)
    assert in_algebra(G, np.diag([1.0, -1.0]), 1e-12)
    assert not in_algebra(G, np.eye(2), 1e-12)
    assert in_algebra(group("gl", 2), np.array([[1e6, 2.0], [-3.0, 4.0]]))


@pytest.mark.parametrize("G", ALL, ids=str)
def test_exp_of_algebra_is_in_group(G, rng):
    H = sample_algebra(G, rng, 1000)
    assert np.all(in_algebra(G, H, 1e-10))
    assert np.all(in_group(G, mat_exp(H), 1e-8))


@pytest.mark.parametrize("G", ALL, ids=str)
def test_projection_is_idempotent(G, rng):
    H = rng.standard_normal((50, G.n, G.n))
    P = project_algebra(G, H)
    np.testing.assert_allclose(project_algebra(G, P), P, atol=1e-13)
    # orthogonality: the removed part is orthogonal to the algebra
    Q = sample_algebra(G, rng, 50)
    np.testing.assert_allclose(np.sum((H - P) * Q, axis=(1, 2)), 0.0, atol=1e-12)


@pytest.mark.parametrize("G", ALL, ids=str)
def test_rank_one_cone_soundness(G):
    pairs = sample_rank_one_pairs(G, np.random.default_rng(3), 500)
    if G.tag in ("SOn", "COn"):
        assert pairs is None
        assert sample_rank_one_cone(G, 0) is None
        return
    a, b = pairs
    assert np.all(np.linalg.norm(rank_one(a, b), axis=(1, 2)) > 0.1)
    assert np.all(in_algebra(G, rank_one(a, b), 1e-10))


def test_sl_cone_is_orthogonal():
    for seed in range(20):
        p = sample_rank_one_cone(group("sl", 2), seed)
        assert abs(np.dot(p.a, p.b)) <= 1e-14
        assert in_algebra(group("sl", 2), p.matrix, 1e-12)


def test_sample_group_element_examples():
    np.testing.assert_array_equal(sample_group_element(group("sl", 2), 0.0, 1), np.eye(2))
    F = sample_group_element(group("sl", 2), 1.0, 7)
    assert abs(np.linalg.det(F) - 1.0) <= 1e-10
    Q = sample_group_element(group("so", 3), 1.0, 7)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-10)
    with pytest.raises(ValueError):
        sample_group_element(group("gl", 2), -1.0, 0)
    np.testing.assert_array_equal(sample_group_element(group("gl", 3), 0.7, 11),
                                  sample_group_element(group("gl", 3), 0.7, 11))


def test_conjugation_examples(rng):
    w = trace_potential()
    U = np.diag([2.0, 0.5])
    assert conjugate_potential(w, U)(np.array([[1.0, 1.0], [0.0, 1.0]])) == pytest.approx(2.0)

    F = rng.standard_normal((100, 3, 3))
    np.testing.assert_allclose(conjugate_potential(w, np.eye(3))(F), w(F), rtol=1e-14)
    nl = builtin("neg_log_abs_det")
    V = rng.standard_normal((3, 3))
    np.testing.assert_allclose(conjugate_potential(nl, V, group("gl", 3))(F), nl(F),
                               rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("name", ["gl", "gl+", "sl"])
def test_conjugation_closure_by_determinant(name, rng):
    G = group(name, 3)
    U = rng.standard_normal((3, 3))
    U[0] *= np.sign(np.linalg.det(U))
    conjugate_potential(builtin("det"), U, G, samples=200)


def test_conjugation_leaving_group_is_reported():
    U = np.diag([2.0, 1.0])
    with pytest.raises(ConstraintError):
        conjugate_potential(builtin("det"), U, group("so", 2))
    with pytest.raises(ValueError):
        conjugate_potential(builtin("det"), np.zeros((2, 2)))
