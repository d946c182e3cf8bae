import copy
import math

import numpy as np
import pytest

from peglab.curve import perturb
from peglab.intersection import (DiagonalBump, TopologyError, circle_generators, clean_formula_check,
                                 euler_bookkeeping, euler_characteristic, orientation_sign, parity_of,
                                 perturb_diagonal_count, signed_total, tangent_matrix, topology_block)
from peglab.residual import Problem, sigma, tau
from peglab.solver import solve

from conftest import FAST


def test_orientation_matches_jacobian_sign(ellipse_report, ellipse):
    # the rectangle residual is 2 (P_L - P_Lphi), so det J = 16 det[tangents]
    for m in ellipse_report.solutions:
        J = ellipse_report.problem.jacobian(ellipse, m.q)
        T = tangent_matrix(ellipse, ellipse_report.problem, m.q)
        assert np.linalg.det(J) == pytest.approx(16 * np.linalg.det(T), rel=1e-10)
        assert orientation_sign(ellipse, ellipse_report.problem, m.q) == m.sign


def test_sigma_flips_sign_at_right_angle(square_report, ellipse):
    p = square_report.problem
    for m in square_report.solutions:
        assert orientation_sign(ellipse, p, sigma(m.q)) == -m.sign
        assert orientation_sign(ellipse, p, tau(m.q)) == m.sign


def test_clean_ledger_balances(ellipse_report):
    led = clean_formula_check(ellipse_report)
    assert led.balanced and led.intersection_number == 0
    assert led.items[0]["contribution"] == 0


def test_euler_ledger(ellipse_report):
    for g in (1, -1):
        led = euler_bookkeeping(ellipse_report, global_sign=g)
        assert led.chi == 0 == led.expected
        assert led.doubling_certificate is True
        assert len(led.generators) == 2 + ellipse_report.raw_solution_count


def test_circle_generators_cancel():
    assert euler_characteristic(circle_generators()) == 0
    assert parity_of(1) == 0 and parity_of(-1) == 1 and parity_of(-1, -1) == 0


def _single_orbit(report):
    bad = copy.deepcopy(report)
    bad.orbits = bad.orbits[:1]
    bad.raw_solution_count = len(bad.orbits[0].members)
    bad.signed_total = signed_total(bad.solutions)
    return bad


def test_single_orbit_contradiction(ellipse_report):
    bad = _single_orbit(ellipse_report)
    with pytest.raises(TopologyError):
        clean_formula_check(bad)
    led = euler_bookkeeping(bad, strict=False)
    assert led.contradiction and abs(led.chi) == 2
    assert led.doubling_certificate is False
    block = topology_block(bad, strict=False)
    assert block["euler_chi"] in (2, -2) and not block["balanced"]


def test_inconsistent_parity_rejected(ellipse_report):
    bad = copy.deepcopy(ellipse_report)
    bad.orbits[0].members[0].sign *= -1
    with pytest.raises(TopologyError):
        euler_bookkeeping(bad)


def test_square_certificate_not_applicable(square_report):
    led = euler_bookkeeping(square_report)
    assert led.chi == 0 and led.doubling_certificate == "n/a"


def test_quad_signed_count_even(ellipse):
    r = solve(perturb(ellipse, 0.02, 5, 4), Problem.quad(0.25, 0.4, 2.0), FAST)
    block = topology_block(r)
    assert block["signed_total"] == 0 and block["euler_chi"] == 0


def test_bump_jacobian_matches_finite_differences(ellipse):
    bump = DiagonalBump(ellipse, 0.3, 0.0125, 0.025)
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.uniform(0, 2 * math.pi) + rng.normal(0, 0.01, 4)
        J = bump.jacobian(q)
        h = 1e-7
        fd = np.column_stack([(bump.value(q + h * e) - bump.value(q - h * e)) / (2 * h) for e in np.eye(4)])
        assert np.linalg.norm(J - fd) <= 1e-5 * max(np.linalg.norm(J), 1e-8)


def test_bump_vanishes_off_diagonal(ellipse):
    bump = DiagonalBump(ellipse, 1.0, 0.0125, 0.025)
    assert np.all(bump.value(np.array([0.0, 1.0, 2.0, 3.0])) == 0)


def test_diagonal_count(ellipse_report, ellipse):
    v = perturb_diagonal_count(ellipse, ellipse_report.problem, 1e-3, report=ellipse_report)
    assert v.count == 2 and sorted(v.signs) == [-1, 1] and v.total_signed == 0
    centers = sorted(z.t1 for z in v.zeros)
    assert centers[0] == pytest.approx(0, abs=1e-9) and centers[1] == pytest.approx(math.pi, abs=1e-9)


def test_unperturbed_diagonal_has_no_transverse_zeros(ellipse):
    v = perturb_diagonal_count(ellipse, Problem.rectangle(1.0), 0.0, strict=False)
    assert v.count == 0 and v.diagonal_only
