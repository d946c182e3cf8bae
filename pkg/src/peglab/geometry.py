"""Ambient maps on C^2 and the dictionary between torus points and pegs.

Points of C^2 are plain ``(z1, z2)`` tuples of Python complex numbers.  The
four curve parameters of a peg are ``q = (t1, t2, t3, t4)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .curve import FourierCurve, evaluate

GEOM_REL_TOL = 1e-8


class GeometryError(ValueError):
    """A torus point does not describe a valid peg."""


class ComplexPair(NamedTuple):
    z1: complex
    z2: complex


@dataclass(frozen=True)
class QuadData:
    """Shape data of a cyclic quadrilateral: diagonal ratios and diagonal angle."""

    s: float = 0.5
    t: float = 0.5
    phi: float = math.pi / 2

    def __post_init__(self):
        if not (0.0 < self.s <= 0.5 and 0.0 < self.t <= 0.5):
            raise ValueError(f"s and t must lie in (0, 1/2], got s={self.s}, t={self.t}")
        if not (0.0 < self.phi < math.pi):
            raise ValueError(f"phi must lie in (0, pi), got {self.phi}")

    @property
    def is_rectangle(self) -> bool:
        return self.s == 0.5 and self.t == 0.5

    def to_json(self) -> dict:
        return {"s": self.s, "t": self.t, "phi": self.phi}


def rectangle_data(phi: float) -> QuadData:
    if not (0.0 < phi <= math.pi / 2):
        raise ValueError(f"rectangle aspect angle must lie in (0, pi/2], got {phi}")
    return QuadData(0.5, 0.5, phi)


@dataclass
class Peg:
    kind: str  # "rectangle" | "cyclic_quadrilateral"
    vertices: Tuple[complex, complex, complex, complex]
    diag_point: complex
    data: QuadData
    counterclockwise: Optional[bool] = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "vertices": [[v.real, v.imag] for v in self.vertices],
            "diag_point": [self.diag_point.real, self.diag_point.imag],
            "data": self.data.to_json(),
            "counterclockwise": self.counterclockwise,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Peg":
        d = obj["data"]
        return cls(
            kind=obj["kind"],
            vertices=tuple(complex(x, y) for x, y in obj["vertices"]),
            diag_point=complex(*obj["diag_point"]),
            data=QuadData(d["s"], d["t"], d["phi"]),
            counterclockwise=obj.get("counterclockwise"),
        )


# --- ambient maps -------------------------------------------------------------

def map_l(p) -> ComplexPair:
    z1, z2 = p
    return ComplexPair((z1 + z2) / 2, (z1 - z2) / 2)


def map_rot(phi: float, p) -> ComplexPair:
    z1, z2 = p
    return ComplexPair(z1, z2 * cmath.exp(1j * phi))


def map_involution(p) -> ComplexPair:
    z1, z2 = p
    return ComplexPair(z1, -z2)


def map_F(r: float, p) -> ComplexPair:
    if not (0.0 < r <= 0.5):
        raise ValueError(f"r must lie in (0, 1/2], got {r}")
    z1, z2 = p
    return ComplexPair((1 - r) * z1 + r * z2, math.sqrt(r * (1 - r)) * (z1 - z2))


def point_L(curve: FourierCurve, t1: float, t2: float) -> ComplexPair:
    return map_l((evaluate(curve, t1), evaluate(curve, t2)))


def point_Lphi(curve: FourierCurve, phi: float, t3: float, t4: float) -> ComplexPair:
    return map_rot(phi, point_L(curve, t3, t4))


def point_T1(curve: FourierCurve, data: QuadData, t1: float, t2: float) -> ComplexPair:
    return map_rot(data.phi, map_F(data.s, (evaluate(curve, t1), evaluate(curve, t2))))


def point_T2(curve: FourierCurve, data: QuadData, t3: float, t4: float) -> ComplexPair:
    return map_F(data.t, (evaluate(curve, t3), evaluate(curve, t4)))


# --- peg extraction -----------------------------------------------------------

@lru_cache(maxsize=64)
def _diameter(curve: FourierCurve) -> float:
    return curve.diameter()


def unsigned_angle(u: complex, v: complex) -> float:
    """Angle in [0, pi] between two nonzero plane vectors."""
    return abs(cmath.phase(v / u))


def signed_area(vertices: Sequence[complex]) -> float:
    z = np.asarray(vertices, dtype=complex)
    w = np.roll(z, -1)
    return 0.5 * float(np.sum(z.real * w.imag - w.real * z.imag))


def _check_distinct(vertices, scale, tol):
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(vertices[i] - vertices[j]) <= tol * scale:
                raise GeometryError("coincident vertices (degenerate peg on the diagonal)")


def extract_rectangle(curve: FourierCurve, phi: float, q, tol: float = GEOM_REL_TOL,
                      residual_tol: Optional[float] = None) -> Peg:
    """Rectangle with vertices ``(g(t3), g(t1), g(t4), g(t2))`` from a solved quadruple."""
    from .residual import residual_rect

    t1, t2, t3, t4 = (float(x) for x in q)
    scale = _diameter(curve)
    g1, g2, g3, g4 = (evaluate(curve, t) for t in (t1, t2, t3, t4))
    res = residual_rect(curve, phi, q).norm
    if res > (residual_tol if residual_tol is not None else tol * scale):
        raise GeometryError(f"residual {res:.3e} too large for a rectangle")
    A, B, C, D = g3, g1, g4, g2
    X = (g1 + g2) / 2
    _check_distinct((A, B, C, D), scale, tol)
    radii = [abs(v - X) for v in (A, B, C, D)]
    if max(radii) - min(radii) > tol * scale:
        raise GeometryError("vertices are not equidistant from the diagonal point")
    if abs(unsigned_angle(A - X, B - X) - phi) > tol * max(1.0, scale):
        raise GeometryError("diagonal angle does not match phi")
    return Peg("rectangle", (A, B, C, D), X, rectangle_data(_fold_rect(phi)),
               signed_area((A, B, C, D)) > 0)


def extract_quad(curve: FourierCurve, data: QuadData, q, tol: float = GEOM_REL_TOL,
                 residual_tol: Optional[float] = None) -> Peg:
    """Cyclic quadrilateral ``A=g(t1), C=g(t2), B=g(t3), D=g(t4)``."""
    from .residual import residual_quad

    t1, t2, t3, t4 = (float(x) for x in q)
    scale = _diameter(curve)
    A, C, B, D = (evaluate(curve, t) for t in (t1, t2, t3, t4))
    res = residual_quad(curve, data, q).norm
    if res > (residual_tol if residual_tol is not None else tol * scale):
        raise GeometryError(f"residual {res:.3e} too large for a quadrilateral")
    _check_distinct((A, B, C, D), scale, tol)
    X = (1 - data.s) * A + data.s * C
    if abs(X - ((1 - data.t) * B + data.t * D)) > tol * scale:
        raise GeometryError("diagonals do not meet at the prescribed ratios")
    if abs(unsigned_angle(C - A, D - B) - data.phi) > tol * max(1.0, scale):
        raise GeometryError("diagonal angle does not match phi")
    kind = "rectangle" if data.is_rectangle else "cyclic_quadrilateral"
    out_data = QuadData(data.s, data.t, _fold_rect(data.phi)) if data.is_rectangle else data
    return Peg(kind, (A, B, C, D), X, out_data, signed_area((A, B, C, D)) > 0)


def _fold_rect(phi: float) -> float:
    return min(phi, math.pi - phi)


def _line_intersection(a, c, b, d):
    # a + u (c - a) = b + v (d - b)
    m = np.array([[(c - a).real, -(d - b).real], [(c - a).imag, -(d - b).imag]])
    rhs = np.array([(b - a).real, (b - a).imag])
    if abs(np.linalg.det(m)) < 1e-300:
        raise GeometryError("diagonals are parallel")
    u, _ = np.linalg.solve(m, rhs)
    return a + u * (c - a)


def recompute_data(peg: Peg) -> QuadData:
    """Shape data ``(|AX|/|AC|, |BX|/|BD|, angle AXB)`` read off the vertices alone."""
    A, B, C, D = peg.vertices
    if min(abs(A - C), abs(B - D)) == 0.0:
        raise GeometryError("coincident vertices")
    X = _line_intersection(A, C, B, D)
    s = abs(A - X) / abs(A - C)
    t = abs(B - X) / abs(B - D)
    if min(abs(A - X), abs(B - X)) == 0.0:
        raise GeometryError("vertex coincides with the diagonal point")
    phi = unsigned_angle(A - X, B - X)
    if peg.kind == "rectangle":
        phi = _fold_rect(phi)
    return QuadData(_snap_half(s), _snap_half(t), phi)


def _snap_half(r: float, slack: float = 1e-9) -> float:
    # ratios computed from rounded vertices may overshoot 1/2 by a few ulps
    return 0.5 if 0.5 < r <= 0.5 + slack else r
