import cmath
import math

import pytest

from peglab.curve import make_circle, make_ellipse
from peglab.geometry import (GeometryError, Peg, QuadData, extract_quad, extract_rectangle, map_F, map_l,
                             map_rot, point_L, point_Lphi, point_T1, point_T2, recompute_data,
                             rectangle_data, signed_area)


def ellipse_rect_params(a, b, u):
    """Quadruple for the axis-aligned rectangle with corner (a cos u, b sin u)."""
    # diagonal one: u and u + pi; diagonal two: -u and pi - u
    return (u, u + math.pi, -u, math.pi - u)


def test_quad_data_ranges():
    with pytest.raises(ValueError):
        QuadData(0.6, 0.5, 1.0)
    with pytest.raises(ValueError):
        QuadData(0.3, 0.3, math.pi)
    with pytest.raises(ValueError):
        rectangle_data(2.0)
    assert QuadData().is_rectangle


def test_maps():
    p = (1 + 2j, -3 + 0.5j)
    assert map_l(p) == ((p[0] + p[1]) / 2, (p[0] - p[1]) / 2)
    assert map_rot(math.pi, p)[1] == pytest.approx(-p[1])
    # F_{1/2} is L scaled by... the same map
    z = map_F(0.5, p)
    assert z[0] == pytest.approx(map_l(p)[0]) and z[1] == pytest.approx(map_l(p)[1])
    with pytest.raises(ValueError):
        map_F(0.7, p)


def test_rectangle_extraction_on_ellipse():
    a, b, u = 2.0, 1.0, 0.7
    c = make_ellipse(a, b)
    q = ellipse_rect_params(a, b, u)
    # the corner sits at polar angle alpha, so the diagonals meet at 2 alpha
    phi = 2 * math.atan2(b * math.sin(u), a * math.cos(u))
    for z, w in zip(point_L(c, q[0], q[1]), point_Lphi(c, phi, q[2], q[3])):
        assert abs(z - w) < 1e-12
    peg = extract_rectangle(c, phi, q)
    expect = {(round(x, 9), round(y, 9)) for x in (a * math.cos(u), -a * math.cos(u))
              for y in (b * math.sin(u), -b * math.sin(u))}
    got = {(round(v.real, 9), round(v.imag, 9)) for v in peg.vertices}
    assert got == expect
    assert abs(peg.diag_point) < 1e-12
    d = recompute_data(peg)
    assert d.s == pytest.approx(0.5, abs=1e-12) and d.t == pytest.approx(0.5, abs=1e-12)
    assert d.phi == pytest.approx(min(phi, math.pi - phi), abs=1e-12)


def test_rectangle_rejects_non_solution():
    with pytest.raises(GeometryError):
        extract_rectangle(make_ellipse(2, 1), 1.0, (0.1, 2.0, 3.0, 4.0))


def test_rectangle_rejects_diagonal():
    c = make_circle()
    with pytest.raises(GeometryError):
        extract_rectangle(c, 1.0, (0.3, 0.3, 0.3, 0.3))


def test_quad_extraction_round_trip_on_circle():
    # two chords of the unit circle through X = 0.3; ratios follow from the chord geometry
    x = 0.3
    X = complex(x, 0)

    def chord(theta):
        bq = 2 * x * math.cos(theta)
        disc = math.sqrt(bq * bq - 4 * (x * x - 1))
        lm, lp = (-bq - disc) / 2, (-bq + disc) / 2
        start, end = X + lm * cmath.exp(1j * theta), X + lp * cmath.exp(1j * theta)
        r = -lm / (lp - lm)
        return (start, end, r) if r <= 0.5 else (end, start, 1 - r)

    A, C, s = chord(1.0)
    B, D, t = chord(2.3)
    if cmath.phase((B - D) / (A - C)) < 0:
        # mirror so the diagonal angle is measured counterclockwise
        A, B, C, D, X = (v.conjugate() for v in (A, B, C, D, X))
    phi = cmath.phase((B - D) / (A - C))
    data = QuadData(s, t, phi)
    q = tuple(cmath.phase(v) % (2 * math.pi) for v in (A, C, B, D))
    c = make_circle()
    z1, z2 = point_T1(c, data, q[0], q[1]), point_T2(c, data, q[2], q[3])
    assert abs(z1[0] - z2[0]) < 1e-12 and abs(z1[1] - z2[1]) < 1e-12
    peg = extract_quad(c, data, q)
    assert abs(peg.diag_point - X) < 1e-12
    d = recompute_data(peg)
    assert d.s == pytest.approx(s, abs=1e-12)
    assert d.t == pytest.approx(t, abs=1e-12)
    assert d.phi == pytest.approx(phi, abs=1e-12)


def test_signed_area_orientation():
    sq = [1, 1j, -1, -1j]
    assert signed_area(sq) == pytest.approx(2.0)
    assert signed_area(sq[::-1]) == pytest.approx(-2.0)


def test_peg_json_round_trip():
    peg = Peg("rectangle", (1 + 0j, 1j, -1 + 0j, -1j), 0j, rectangle_data(math.pi / 2), True)
    assert Peg.from_json(peg.to_json()) == peg
