"""Root-finding systems on the 4-torus whose off-diagonal zeros are pegs.

The rectangle system with aspect angle ``phi`` is

    G(q) = ( g1 + g2 - g3 - g4,  g1 - g2 - (g3 - g4) e^{i phi} ),   gj = gamma(tj),

which is twice the difference of the two torus points, so it has the same zero
set at a friendlier scale.  The quadrilateral system with data ``(s, t, phi)``
is ``T1(t1, t2) - T2(t3, t4)``.  Both are flattened to four reals in the order
``(Re eq1, Im eq1, Re eq2, Im eq2)``; every determinant in the package uses
this order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .curve import TWO_PI, FourierCurve
from .geometry import QuadData, rectangle_data


@dataclass(frozen=True)
class TorusQuadruple:
    t1: float
    t2: float
    t3: float
    t4: float

    def __post_init__(self):
        for name in ("t1", "t2", "t3", "t4"):
            object.__setattr__(self, name, float(np.mod(getattr(self, name), TWO_PI)))

    @classmethod
    def of(cls, q) -> "TorusQuadruple":
        if isinstance(q, cls):
            return q
        return cls(*(float(x) for x in q))

    def as_array(self) -> np.ndarray:
        return np.array([self.t1, self.t2, self.t3, self.t4])

    def __iter__(self):
        return iter((self.t1, self.t2, self.t3, self.t4))


@dataclass(frozen=True)
class ResidualValue:
    components: Tuple[float, float, float, float]
    norm: float


# --- symmetry transforms on quadruples ---------------------------------------

def tau(q):
    """Swap within both pairs; realizes the involution (z1, z2) -> (z1, -z2)."""
    q = np.asarray(q, dtype=float)
    return q[..., [1, 0, 3, 2]]


def sigma(q):
    """Order-four relabeling of a square; ``sigma^2 = tau``."""
    q = np.asarray(q, dtype=float)
    return q[..., [2, 3, 1, 0]]


def wrap(q):
    return np.mod(q, TWO_PI)


def torus_delta(a, b):
    """Componentwise signed difference ``a - b`` folded into ``[-pi, pi)``."""
    return np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi


def torus_distance(a, b):
    return np.linalg.norm(torus_delta(a, b), axis=-1)


def min_pair_separation(Q):
    """Smallest circle distance among the four parameters, per row."""
    Q = np.asarray(Q, dtype=float)
    seps = []
    for i in range(4):
        for j in range(i + 1, 4):
            d = np.mod(Q[..., i] - Q[..., j], TWO_PI)
            seps.append(np.minimum(d, TWO_PI - d))
    return np.min(np.stack(seps, axis=-1), axis=-1)


# --- batched curve evaluation -------------------------------------------------

def curve_values(curve: FourierCurve, T, with_second: bool = False):
    """``gamma``, ``gamma'`` (and ``gamma''``) at an array of parameters.

    Uses powers of ``e^{it}`` instead of one exponential per mode.
    """
    T = np.asarray(T, dtype=float)
    m = curve.max_mode
    c = curve.coeffs
    w = np.exp(1j * T)
    p = np.ones_like(w)
    g = np.full(T.shape, c[m], dtype=complex)
    dg = np.zeros(T.shape, dtype=complex)
    d2g = np.zeros(T.shape, dtype=complex) if with_second else None
    for k in range(1, m + 1):
        p = p * w
        pc = np.conj(p)
        cp, cm = c[m + k], c[m - k]
        g += cp * p + cm * pc
        dg += 1j * k * (cp * p - cm * pc)
        if with_second:
            d2g -= k * k * (cp * p + cm * pc)
    if with_second:
        return g, dg, d2g
    return g, dg


def _flatten(e1, e2):
    return np.stack([e1.real, e1.imag, e2.real, e2.imag], axis=-1)


# --- problems -----------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    """Either the rectangle system at aspect angle ``phi`` or the quadrilateral system.

    ``right_angle`` is the caller's exact declaration that ``phi = pi/2``; it
    switches the symmetry quotient from order two to order four.
    """

    kind: str
    data: QuadData
    right_angle: bool = False

    @classmethod
    def rectangle(cls, phi=None, right_angle: bool = False) -> "Problem":
        if right_angle:
            phi = math.pi / 2
        if phi is None:
            raise ValueError("rectangle problem needs phi or right_angle")
        return cls("rectangle", rectangle_data(float(phi)), right_angle)

    @classmethod
    def quad(cls, s: float, t: float, phi=None, right_angle: bool = False) -> "Problem":
        if right_angle:
            phi = math.pi / 2
        return cls("quad", QuadData(float(s), float(t), float(phi)), right_angle)

    @property
    def phi(self) -> float:
        return self.data.phi

    @property
    def symmetric(self) -> bool:
        """Whether the zero set carries the pair-swap symmetry."""
        return self.kind == "rectangle" or self.data.is_rectangle

    @property
    def group_order(self) -> int:
        if not self.symmetric:
            return 1
        return 4 if self.right_angle else 2

    def residual(self, curve, Q):
        if self.kind == "rectangle":
            return rect_residual_batch(curve, self.phi, Q)
        return quad_residual_batch(curve, self.data, Q)

    def jacobian(self, curve, Q):
        if self.kind == "rectangle":
            return rect_jacobian_batch(curve, self.phi, Q)
        return quad_jacobian_batch(curve, self.data, Q)

    def residual_and_jacobian(self, curve, Q):
        if self.kind == "rectangle":
            return _rect_both(curve, self.phi, Q)
        return _quad_both(curve, self.data, Q)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "phi": self.phi, "right_angle": self.right_angle}
        if self.kind == "quad":
            out.update(s=self.data.s, t=self.data.t)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Problem":
        if obj["kind"] == "rectangle":
            return cls.rectangle(obj["phi"], obj.get("right_angle", False))
        return cls.quad(obj["s"], obj["t"], obj["phi"], obj.get("right_angle", False))


def _rect_both(curve, phi, Q, need_jac=True):
    Q = np.asarray(Q, dtype=float)
    g, dg = curve_values(curve, Q)
    e = np.exp(1j * phi)
    F = _flatten(g[..., 0] + g[..., 1] - g[..., 2] - g[..., 3],
                 g[..., 0] - g[..., 1] - (g[..., 2] - g[..., 3]) * e)
    if not need_jac:
        return F, None
    cols = [
        _flatten(dg[..., 0], dg[..., 0]),
        _flatten(dg[..., 1], -dg[..., 1]),
        _flatten(-dg[..., 2], -e * dg[..., 2]),
        _flatten(-dg[..., 3], e * dg[..., 3]),
    ]
    return F, np.stack(cols, axis=-1)


def _quad_weights(data: QuadData):
    s, t = data.s, data.t
    return s, t, math.sqrt(s * (1 - s)), math.sqrt(t * (1 - t)), np.exp(1j * data.phi)


def _quad_both(curve, data, Q, need_jac=True):
    Q = np.asarray(Q, dtype=float)
    s, t, rs, rt, e = _quad_weights(data)
    g, dg = curve_values(curve, Q)
    g1, g2, g3, g4 = (g[..., i] for i in range(4))
    F = _flatten((1 - s) * g1 + s * g2 - (1 - t) * g3 - t * g4,
                 e * rs * (g1 - g2) - rt * (g3 - g4))
    if not need_jac:
        return F, None
    d1, d2, d3, d4 = (dg[..., i] for i in range(4))
    cols = [
        _flatten((1 - s) * d1, e * rs * d1),
        _flatten(s * d2, -e * rs * d2),
        _flatten(-(1 - t) * d3, -rt * d3),
        _flatten(-t * d4, rt * d4),
    ]
    return F, np.stack(cols, axis=-1)


def rect_residual_batch(curve, phi, Q):
    return _rect_both(curve, phi, Q, need_jac=False)[0]


def rect_jacobian_batch(curve, phi, Q):
    return _rect_both(curve, phi, Q)[1]


def quad_residual_batch(curve, data, Q):
    return _quad_both(curve, data, Q, need_jac=False)[0]


def quad_jacobian_batch(curve, data, Q):
    return _quad_both(curve, data, Q)[1]


def _value(F) -> ResidualValue:
    comps = tuple(float(x) for x in F)
    return ResidualValue(comps, float(np.linalg.norm(F)))


def residual_rect(curve: FourierCurve, phi: float, q) -> ResidualValue:
    return _value(rect_residual_batch(curve, phi, np.asarray(tuple(q), dtype=float)))


def residual_quad(curve: FourierCurve, data: QuadData, q) -> ResidualValue:
    return _value(quad_residual_batch(curve, data, np.asarray(tuple(q), dtype=float)))


def jacobian_rect(curve: FourierCurve, phi: float, q) -> np.ndarray:
    return rect_jacobian_batch(curve, phi, np.asarray(tuple(q), dtype=float))


def jacobian_quad(curve: FourierCurve, data: QuadData, q) -> np.ndarray:
    return quad_jacobian_batch(curve, data, np.asarray(tuple(q), dtype=float))
