import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gquasi.convexity import check_line_convexity
from gquasi.groups import group, sample_group_elements
from gquasi.linalg import random_rotation
from gquasi.potentials import (
    BUILTINS,
    DomainError,
    builtin,
    calibrate_sort_order,
    chart_to_matrix,
    check_convex_gauge_hypotheses,
    check_log_gauge_hypotheses,
    constant,
    gauge,
    involution,
    iso_family,
    sl2_affine_family,
)


def test_builtin_examples():
    assert builtin("neg_log_abs_det")(np.diag([2.0, 0.5])) == pytest.approx(0.0, abs=1e-15)
    assert builtin("log_trace_inv_stretch")(np.eye(2)) == pytest.approx(np.log(2.0))
    assert builtin("det_log_trace_stretch")(np.diag([2.0, 2.0])) == pytest.approx(4 * np.log(4.0))
    assert builtin("frobenius_sq")(np.array([[1.0, 2.0], [3.0, 4.0]])) == 30.0
    with pytest.raises(KeyError):
        builtin("nope")


def test_domain_errors():
    with pytest.raises(DomainError):
        builtin("neg_log_abs_det")(np.zeros((2, 2)))
    with pytest.raises(DomainError):
        builtin("det_log_trace_stretch")(np.diag([1.0, -1.0]))
    with pytest.raises(DomainError):
        iso_family(gauge("sum"))(np.diag([1.0, 0.0]))
    with pytest.raises(DomainError):
        involution(builtin("frobenius_sq"))(np.diag([1.0, 0.0]))


def test_neg_log_abs_det_identity(rng):
    F = rng.standard_normal((1000, 3, 3))
    np.testing.assert_allclose(builtin("neg_log_abs_det")(F) + np.log(np.abs(np.linalg.det(F))),
                               0.0, atol=1e-12)


def test_involution_examples(rng):
    F = rng.standard_normal((200, 2, 2))
    d = np.abs(np.linalg.det(F))
    np.testing.assert_allclose(involution(builtin("neg_log_abs_det"))(F), d * np.log(d),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(involution(constant(3.0))(F), 3.0 * d, rtol=1e-12)


@pytest.mark.parametrize("name", sorted(BUILTINS))
@pytest.mark.parametrize("n", [2, 3])
def test_involution_is_an_involution(name, n):
    w = builtin(name)
    G = group("gl+" if w.group == "GLnPlus" else "gl", n)
    F = sample_group_elements(G, 0.7, np.random.default_rng(5), 1000)
    ww = involution(involution(w))
    ref = w(F)
    assert np.max(np.abs(ww(F) - ref) / (1.0 + np.abs(ref))) <= 1e-10


def test_involution_prolongation_is_not_convex_across_singular_set():
    w = involution(builtin("neg_log_abs_det"), singular_value=0.0)
    a = np.array([1.0, 0.0])
    # det(1 + t a⊗a) = 1 + t vanishes at t = -1
    rep = check_line_convexity(w, np.eye(2), a, a, center=-1.0, radius=0.5)
    assert rep.verdict == "fail"
    assert rep.worst_margin < -0.1
    # away from the singular set the same line is convex
    assert check_line_convexity(w, np.eye(2), a, a, center=0.0, radius=0.5).verdict == "pass"


def test_iso_family_examples(rng):
    G = group("gl+", 3)
    F = sample_group_elements(G, 0.8, rng, 500)
    np.testing.assert_allclose(iso_family(gauge("neg_sum_log"))(F), builtin("neg_log_abs_det")(F),
                               atol=1e-12)
    np.testing.assert_allclose(iso_family(gauge("log_sum_inv"))(F),
                               builtin("log_trace_inv_stretch")(F), atol=1e-12)
    assert iso_family(gauge("sum"))(np.diag([3.0, 2.0])) == pytest.approx(5.0)


@pytest.mark.parametrize("g", ["neg_sum_log", "log_sum_inv", "sum", "max", "ogden"])
def test_iso_family_is_isotropic(g, rng):
    w = iso_family(gauge(g))
    F = sample_group_elements(group("gl+", 3), 0.8, rng, 300)
    Q = random_rotation(rng, 3, 300)
    P = random_rotation(rng, 3, 300)
    ref = w(F)
    assert np.max(np.abs(w(Q @ F @ P) - ref) / (1.0 + np.abs(ref))) <= 1e-9


@given(st.permutations([0, 1, 2]), st.lists(st.floats(0.1, 5.0), min_size=3, max_size=3))
def test_gauges_are_symmetric(perm, s):
    s = np.array(s)
    for name in ("neg_sum_log", "log_sum_inv", "sum", "max", "power_sum", "ogden"):
        g = gauge(name)
        assert g(s[list(perm)]) == pytest.approx(g(s), rel=1e-13, abs=1e-13)


def test_sl2_family_examples():
    assert sl2_affine_family(0, 0, 0, 1, 0)(np.eye(2)) == 1.0
    assert sl2_affine_family(1, 0, 0, 0, 0).chart_eval(1.0, 0.0, 0.0) == 1.0
    w = sl2_affine_family(1, 2, 3, 4, 5)
    assert w.chart_eval(2.0, 1.0, 1.0) == pytest.approx(19.0)
    assert w(chart_to_matrix(2.0, 1.0, 1.0)) == pytest.approx(19.0)
    with pytest.raises(DomainError):
        w.chart_eval(0.0, 1.0, 1.0)


def test_sl2_family_second_chart_is_continuous(rng):
    w = sl2_affine_family(*rng.standard_normal(5))
    # F(X) = [[X, 1], [2X - 1, 2]] stays in SL(2) while X crosses 0
    vals = [w(np.array([[X, 1.0], [2.0 * X - 1.0, 2.0]])) for X in (1e-8, 1e-11, 0.0, -1e-11)]
    np.testing.assert_allclose(vals, vals[0], atol=1e-6)
    with pytest.raises(DomainError):
        w(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_potential_algebra():
    w = builtin("frobenius_sq")
    F = np.array([[1.0, 2.0], [0.0, 1.0]])
    assert (-w)(F) == -6.0
    assert w.scaled(0.5)(F) == 3.0
    r = w.where(lambda F: np.linalg.det(F) > 0.5)
    assert r(F) == 6.0
    with pytest.raises(DomainError):
        r(np.diag([0.1, 1.0]))


# --- hypothesis checkers -------------------------------------------------------


def test_calibration_picks_a_consistent_order():
    cal = calibrate_sort_order(2)
    assert cal["consistent"]
    assert cal["chosen"] in ("ascending", "descending")
    assert all(v == "pass" for v in cal["verdicts"][cal["chosen"]].values())


@pytest.mark.parametrize("n", [2, 3])
def test_log_gauge_hypotheses(n):
    for g in ("neg_sum_log", "log_sum_inv"):
        rep = check_log_gauge_hypotheses(gauge(g), n, samples=1000)
        assert rep.verdict == "pass", g
        assert rep.metadata["calibration"]["chosen"] == rep.metadata["sort_order"]
    rep = check_log_gauge_hypotheses(gauge("sum"), n, samples=1000)
    assert rep.verdict == "fail"
    assert "b" in rep.metadata["failed_conditions"]
    assert "a" not in rep.metadata["failed_conditions"]


def test_linear_h_has_analytic_partials():
    from gquasi.potentials import _partial_sum_gradient
    S = np.cumsum(np.sort(np.random.default_rng(0).uniform(-3, 3, (50, 3)), axis=-1), axis=-1)
    grad = _partial_sum_gradient(gauge("neg_sum_log"), S, 1e-5)
    np.testing.assert_allclose(grad[:, :-1], 0.0, atol=1e-8)
    np.testing.assert_allclose(grad[:, -1], -1.0, atol=1e-8)


def test_convex_gauge_hypotheses():
    rep = check_convex_gauge_hypotheses(gauge("sum"), 2, samples=1000)
    assert rep.verdict == "pass"
    assert rep.metadata["conclusion"] == "pass"
    assert check_convex_gauge_hypotheses(gauge("max"), 3, samples=1000).verdict == "pass"
    rep = check_convex_gauge_hypotheses(gauge("neg_sum_log"), 2, samples=1000)
    assert rep.verdict == "fail"
    assert rep.metadata["failed_conditions"] == ["monotone"]
