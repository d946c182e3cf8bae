import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peglab.curve import make_circle, make_ellipse, perturb
from peglab.geometry import QuadData, point_L, point_Lphi, point_T1, point_T2
from peglab.residual import (Problem, TorusQuadruple, min_pair_separation, residual_quad, residual_rect,
                             sigma, tau, torus_distance, wrap)


def central_jacobian(problem, curve, q, h=1e-6):
    cols = []
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        cols.append((problem.residual(curve, q + e) - problem.residual(curve, q - e)) / (2 * h))
    return np.column_stack(cols)


def test_rect_residual_is_twice_torus_difference():
    c = perturb(make_ellipse(2, 1), 0.03, 4, 2)
    q = (0.3, 2.1, 4.0, 5.5)
    phi = 0.8
    a, b = point_L(c, q[0], q[1]), point_Lphi(c, phi, q[2], q[3])
    r = residual_rect(c, phi, q).components
    expect = [2 * (a[0] - b[0]).real, 2 * (a[0] - b[0]).imag, 2 * (a[1] - b[1]).real,
              2 * (a[1] - b[1]).imag]
    np.testing.assert_allclose(r, expect, atol=1e-13)


def test_quad_residual_is_torus_difference():
    c = perturb(make_ellipse(2, 1), 0.03, 4, 3)
    d = QuadData(0.3, 0.4, 2.0)
    q = (0.3, 2.1, 4.0, 5.5)
    a, b = point_T1(c, d, q[0], q[1]), point_T2(c, d, q[2], q[3])
    r = residual_quad(c, d, q).components
    np.testing.assert_allclose(r, [(a[0] - b[0]).real, (a[0] - b[0]).imag,
                                   (a[1] - b[1]).real, (a[1] - b[1]).imag], atol=1e-13)


def test_half_quad_matches_rectangle_after_relabeling():
    # with s = t = 1/2 the quad system is the rectangle system with the tori swapped, halved
    c = perturb(make_ellipse(2, 1), 0.02, 3, 5)
    q = np.array([0.4, 1.9, 3.3, 5.0])
    phi = 1.1
    r = Problem.rectangle(phi).residual(c, q[[2, 3, 0, 1]])
    qq = Problem.quad(0.5, 0.5, phi).residual(c, q)
    np.testing.assert_allclose(np.linalg.norm(qq), np.linalg.norm(r) / 2, rtol=1e-12)


def test_diagonal_is_in_zero_set():
    c = make_ellipse(2, 1)
    for prob in (Problem.rectangle(0.7), Problem.quad(0.3, 0.4, 2.0)):
        for t in np.linspace(0, 6, 7):
            assert np.linalg.norm(prob.residual(c, np.full(4, t))) < 1e-14


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["rect", "quad"]))
def test_jacobian_matches_finite_differences(seed, kind):
    rng = np.random.default_rng(seed)
    c = perturb(make_ellipse(rng.uniform(1, 3), rng.uniform(0.5, 1.5)), 0.03, 5, seed, check=False)
    if kind == "rect":
        prob = Problem.rectangle(rng.uniform(0.05, math.pi / 2))
    else:
        prob = Problem.quad(rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5), rng.uniform(0.05, 3.0))
    q = rng.uniform(0, 2 * math.pi, 4)
    J = prob.jacobian(c, q)
    fd = central_jacobian(prob, c, q)
    assert np.linalg.norm(J - fd) <= 1e-6 * np.linalg.norm(J)


def test_symmetries():
    q = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(tau(tau(q)), q)
    assert np.array_equal(sigma(sigma(q)), tau(q))
    assert np.array_equal(sigma(sigma(sigma(sigma(q)))), q)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, math.pi / 2))
def test_tau_preserves_norm_and_sigma_at_right_angle(seed, phi):
    rng = np.random.default_rng(seed)
    c = perturb(make_ellipse(2, 1), 0.03, 4, seed, check=False)
    q = rng.uniform(0, 2 * math.pi, 4)
    p = Problem.rectangle(phi)
    assert np.linalg.norm(p.residual(c, tau(q))) == pytest.approx(np.linalg.norm(p.residual(c, q)), rel=1e-12)
    sq = Problem.rectangle(right_angle=True)
    assert np.linalg.norm(sq.residual(c, sigma(q))) == pytest.approx(np.linalg.norm(sq.residual(c, q)),
                                                                     rel=1e-12)


def test_torus_helpers():
    assert torus_distance([0.01, 0, 0, 0], [2 * math.pi - 0.01, 0, 0, 0]) == pytest.approx(0.02)
    assert min_pair_separation([0.0, 1.0, 2.0, 6.2]) == pytest.approx(2 * math.pi - 6.2)
    t = TorusQuadruple(-0.5, 7.0, 1.0, 2.0)
    assert t.t1 == pytest.approx(2 * math.pi - 0.5) and t.t2 == pytest.approx(7.0 - 2 * math.pi)
    assert np.all(wrap(np.array([-1.0, 10.0])) < 2 * math.pi)


def test_problem_validation_and_json():
    with pytest.raises(ValueError):
        Problem.rectangle(2.0)
    with pytest.raises(ValueError):
        Problem.quad(0.7, 0.5, 1.0)
    assert Problem.rectangle(right_angle=True).group_order == 4
    assert Problem.rectangle(0.3).group_order == 2
    assert Problem.quad(0.3, 0.5, 1.0).group_order == 1
    for p in (Problem.rectangle(0.3), Problem.quad(0.3, 0.4, 2.0), Problem.rectangle(right_angle=True)):
        assert Problem.from_json(p.to_json()) == p


def test_circle_family_is_zero():
    c = make_circle()
    phi = math.pi / 4
    for t3 in np.linspace(0, 6, 9):
        q = np.array([t3 + phi, t3 + phi + math.pi, t3, t3 + math.pi])
        assert np.linalg.norm(Problem.rectangle(phi).residual(c, q)) < 1e-14
