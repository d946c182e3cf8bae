import json
import math

import numpy as np
import pytest

from peglab.curve import NotEmbeddedError, FourierCurve, make_circle, perturb
from peglab.residual import Problem
from peglab.solver import (OrbitIntegrityError, SolveConfig, SolveReport, cluster, newton_refine,
                           quotient_symmetry, seed_grid, solve)

from conftest import FAST


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(grid_per_axis=0)
    with pytest.raises(ValueError):
        SolveConfig(cluster_radius=1.0)
    assert "workers" not in SolveConfig(workers=3).to_json()


def test_seed_grid_excludes_diagonal():
    from peglab.residual import min_pair_separation

    Q = seed_grid(8, 0.05)
    assert len(Q) == len(np.unique(Q, axis=0))
    assert np.all(min_pair_separation(Q) >= 0.05)


def test_newton_converges_quadratically_near_root(ellipse_report, ellipse):
    q = ellipse_report.orbits[0].representative.q
    p = ellipse_report.problem
    Q, n = newton_refine(p, ellipse, q + 1e-3, 8)
    assert n[0] < 1e-13
    assert np.linalg.norm(((Q[0] - q + math.pi) % (2 * math.pi)) - math.pi) < 1e-10


def test_cluster_keeps_lowest_residual():
    Q = np.array([[1.0, 2, 3, 4], [1.0 + 1e-5, 2, 3, 4], [4.0, 3, 2, 1]])
    keep = cluster(Q, np.array([1e-12, 1e-14, 1e-13]), 1e-3)
    assert sorted(keep.tolist()) == [1, 2]


def test_cluster_across_the_seam():
    Q = np.array([[1e-6, 2, 3, 4], [2 * math.pi - 1e-6, 2, 3, 4]])
    assert len(cluster(Q, np.zeros(2), 1e-3)) == 1


def test_ellipse_two_orbits(ellipse_report):
    r = ellipse_report
    assert len(r.orbits) == 2 and r.raw_solution_count == 4
    assert r.signed_total == 0
    assert not r.degenerate_family and not r.warnings
    for o in r.orbits:
        assert len({m.sign for m in o.members}) == 1
        assert all(m.transverse for m in o.members)


def test_square_single_c4_orbit(square_report):
    r = square_report
    assert len(r.orbits) == 1 and r.raw_solution_count == 4
    assert r.orbits[0].orbit_sign is None  # sigma swaps the tori and flips the sign
    assert r.signed_total == 0


def test_circle_is_degenerate():
    r = solve(make_circle(), Problem.rectangle(math.pi / 4), SolveConfig(grid_per_axis=10))
    assert r.degenerate_family and len(r.chain) >= 20
    assert r.orbits == []


def test_not_embedded_raises():
    with pytest.raises(NotEmbeddedError):
        solve(FourierCurve.from_modes({1: 1.0, 2: 1.0}), Problem.rectangle(1.0), FAST)


def test_quad_orbits_are_singletons(ellipse):
    c = perturb(ellipse, 0.02, 5, 1)
    r = solve(c, Problem.quad(0.3, 0.4, 2.0), FAST)
    assert len(r.orbits) >= 2
    assert all(len(o.members) == 1 for o in r.orbits)
    assert r.signed_total % 2 == 0


def test_missing_partner_is_reported(ellipse_report):
    members = [ellipse_report.orbits[0].members[0]]
    with pytest.raises(OrbitIntegrityError):
        quotient_symmetry(members, ellipse_report.problem, FAST)


def test_report_round_trip_and_determinism(ellipse, ellipse_report):
    text = json.dumps(ellipse_report.to_json(), sort_keys=True)
    back = SolveReport.from_json(json.loads(text))
    assert json.dumps(back.to_json(), sort_keys=True) == text
    again = solve(ellipse, Problem.rectangle(math.pi / 3), FAST)
    assert json.dumps(again.to_json(), sort_keys=True) == text


def test_worker_pool_matches_serial(ellipse):
    p = Problem.rectangle(0.9)
    a = solve(ellipse, p, SolveConfig(grid_per_axis=10, workers=1))
    b = solve(ellipse, p, SolveConfig(grid_per_axis=10, workers=2))
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
