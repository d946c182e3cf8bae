"""Orientation signs and the intersection-number bookkeeping of a solve.

Conventions:

* a torus is oriented by its parameter order, ``(t1, t2)`` for the first and
  ``(t3, t4)`` for the second;
* C^2 is oriented by ``(Re z1, Im z1, Re z2, Im z2)``;
* the sign of a transverse point is the sign of the determinant of the four
  tangent vectors, first torus then second.

The clean component (the curve sitting on the diagonal) has Euler
characteristic zero, so its own sign never enters the totals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .curve import FourierCurve
from .residual import Problem, TorusQuadruple, _quad_weights, curve_values, wrap

CIRCLE_EULER_CHAR = 0
DET_REL_FLOOR = 1e-12


class DegenerateIntersectionError(ValueError):
    """The tangent spaces do not span C^2 at the point."""


class TopologyError(RuntimeError):
    """Bookkeeping does not balance; carries the offending ledger."""

    def __init__(self, message, ledger=None):
        super().__init__(message)
        self.ledger = ledger


# --- signs ----------------------------------------------------------------------

def _flat(z1, z2):
    return np.array([z1.real, z1.imag, z2.real, z2.imag])


def tangent_matrix(curve: FourierCurve, problem: Problem, q) -> np.ndarray:
    """Columns: tangents of the first torus in ``t1, t2``, then the second in ``t3, t4``."""
    q = np.asarray(tuple(q), dtype=float)
    _, dg = curve_values(curve, q)
    d1, d2, d3, d4 = (complex(x) for x in dg)
    if problem.kind == "rectangle":
        e = complex(np.exp(1j * problem.phi))
        cols = [_flat(d1 / 2, d1 / 2), _flat(d2 / 2, -d2 / 2),
                _flat(d3 / 2, e * d3 / 2), _flat(d4 / 2, -e * d4 / 2)]
    else:
        s, t, rs, rt, e = _quad_weights(problem.data)
        e = complex(e)
        cols = [_flat((1 - s) * d1, e * rs * d1), _flat(s * d2, -e * rs * d2),
                _flat((1 - t) * d3, rt * d3), _flat(t * d4, -rt * d4)]
    return np.column_stack(cols)


def orientation_sign(curve: FourierCurve, problem: Problem, q) -> int:
    m = tangent_matrix(curve, problem, q)
    det = np.linalg.det(m)
    scale = np.max(np.linalg.norm(m, axis=0))
    if abs(det) < DET_REL_FLOOR * scale ** 4:
        raise DegenerateIntersectionError(f"determinant {det:.3e} too small to sign")
    return 1 if det > 0 else -1


def signed_total(solutions) -> int:
    total = 0
    for s in solutions:
        if s.sign not in (-1, 1):
            raise TopologyError(f"unsigned solution at {tuple(s.quadruple)}")
        total += s.sign
    return total


def pair_signs_agree(orbit) -> bool:
    """Members related by the involution carry equal signs."""
    from .residual import tau, torus_distance

    for a in orbit.members:
        partner = min(orbit.members, key=lambda b: float(torus_distance(wrap(tau(a.q)), b.q)))
        if partner.sign != a.sign:
            return False
    return True


# --- clean-intersection ledger -------------------------------------------------

@dataclass
class CleanComponent:
    description: str
    sign: Optional[int]
    euler_char: int

    @property
    def contribution(self) -> int:
        return 0 if self.sign is None else self.sign * self.euler_char

    def to_json(self) -> dict:
        return {"description": self.description, "sign": self.sign,
                "euler_char": self.euler_char, "contribution": self.contribution}


@dataclass
class CleanLedger:
    items: List[dict]
    intersection_number: int
    expected: int = 0
    warnings: List[str] = field(default_factory=list)

    @property
    def balanced(self) -> bool:
        return self.intersection_number == self.expected

    def to_json(self) -> dict:
        return {"items": self.items, "intersection_number": self.intersection_number,
                "expected": self.expected, "balanced": self.balanced, "warnings": self.warnings}


def _require_clean(report):
    if report.degenerate_family or report.isolated_degeneracies:
        raise TopologyError("report contains non-transverse solutions; bookkeeping needs transversality")


def clean_formula_check(report, strict: bool = True) -> CleanLedger:
    """Intersection number as circle term (times zero) plus one term per orbit.

    Must equal zero because the first torus can be translated off the second.
    """
    _require_clean(report)
    circle = CleanComponent("curve x {0} (clean circle)", None, CIRCLE_EULER_CHAR)
    items = [dict(circle.to_json(), note="x0")]
    total = circle.contribution
    for k, orbit in enumerate(report.orbits):
        contrib = signed_total(orbit.members)
        items.append({"description": f"orbit {k}", "size": len(orbit.members),
                      "signs": [m.sign for m in orbit.members], "contribution": contrib})
        total += contrib
    ledger = CleanLedger(items, total)
    if not report.orbits and report.problem.kind == "rectangle":
        ledger.warnings.append("no off-diagonal solutions although a rectangle always exists")
    if strict and not ledger.balanced:
        raise TopologyError(f"ledger sums to {total}, not 0: a solution is missing or a sign is wrong",
                            ledger)
    return ledger


# --- graded generators ---------------------------------------------------------

@dataclass
class GradedGenerator:
    label: str
    parity: int
    origin: str  # "circle-morse-point" | "transverse-pair-member"

    def to_json(self) -> dict:
        return {"label": self.label, "parity": self.parity, "origin": self.origin}


@dataclass
class EulerLedger:
    generators: List[GradedGenerator]
    chi: int
    expected: int
    doubling_certificate: object  # True | False | "n/a"
    contradiction: bool

    @property
    def consistent(self) -> bool:
        return self.chi == self.expected

    def to_json(self) -> dict:
        return {"generators": [g.to_json() for g in self.generators], "euler_chi": self.chi,
                "expected": self.expected, "doubling_certificate": self.doubling_certificate,
                "contradiction": self.contradiction}


def parity_of(sign: int, global_sign: int = 1) -> int:
    """Degree mod 2 from an orientation sign; ``(-1)^parity = global_sign * sign``."""
    return 0 if global_sign * sign > 0 else 1


def circle_generators() -> List[GradedGenerator]:
    return [GradedGenerator("x", 1, "circle-morse-point"), GradedGenerator("y", 0, "circle-morse-point")]


def euler_characteristic(generators) -> int:
    return sum(-1 if g.parity else 1 for g in generators)


def euler_bookkeeping(report, global_sign: int = 1, strict: bool = True) -> EulerLedger:
    """Graded generator multiset and its Euler characteristic.

    The characteristic has to vanish; if it does and at least one orbit exists,
    there are orbits of both parities, hence at least two pegs.
    """
    if global_sign not in (-1, 1):
        raise ValueError("global_sign must be +1 or -1")
    _require_clean(report)
    gens = circle_generators()
    orbit_parities = []
    for k, orbit in enumerate(report.orbits):
        if report.problem.group_order == 4:
            if not pair_signs_agree(orbit):
                raise TopologyError(f"orbit {k}: involution partners carry different parities")
        elif len({m.sign for m in orbit.members}) != 1:
            raise TopologyError(f"orbit {k}: parity assignment inconsistent within the orbit")
        for j, m in enumerate(orbit.members):
            gens.append(GradedGenerator(f"p{k}.{j}", parity_of(m.sign, global_sign),
                                        "transverse-pair-member"))
        orbit_parities.append({parity_of(m.sign, global_sign) for m in orbit.members})
    chi = euler_characteristic(gens)
    expected = global_sign * signed_total(report.solutions) + CIRCLE_EULER_CHAR
    contradiction = chi != 0
    if contradiction or not report.orbits or report.problem.group_order == 4:
        certificate = False if contradiction else "n/a"
    else:
        flat = set().union(*orbit_parities)
        certificate = len(report.orbits) >= 2 and flat == {0, 1}
        if report.problem.group_order == 1:
            certificate = len(report.solutions) >= 2 and flat == {0, 1}
    ledger = EulerLedger(gens, chi, expected, certificate, contradiction)
    if strict and chi != expected:
        raise TopologyError(f"Euler characteristic {chi} disagrees with signed count {expected}", ledger)
    if strict and contradiction:
        raise TopologyError(f"Euler characteristic {chi} != 0 contradicts displaceability", ledger)
    return ledger


def topology_block(report, global_sign: int = 1, strict: bool = True) -> dict:
    """The ``topology`` section of a report."""
    clean = clean_formula_check(report, strict=strict)
    euler = euler_bookkeeping(report, global_sign, strict=strict)
    return {
        "signed_total": clean.intersection_number,
        "euler_chi": euler.chi,
        "ledger": clean.items,
        "doubling_certificate": euler.doubling_certificate,
        "balanced": clean.balanced,
        "contradiction": euler.contradiction,
        "global_sign": global_sign,
        "generators": [g.to_json() for g in euler.generators],
        "warnings": clean.warnings,
    }


# --- perturbation near the diagonal --------------------------------------------

def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def _smooth_step_deriv(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    a = np.exp(-1.0 / xs)
    b = np.exp(-1.0 / (1.0 - xs))
    da = a / xs ** 2
    db = -b / (1.0 - xs) ** 2
    d = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return np.where(inside, d, 0.0)


@dataclass(frozen=True)
class DiagonalBump:
    """``eps * bump(d) * h'(m) * nu(m)`` added to the residual near the small diagonal.

    ``m`` is the mean angle of the quadruple, ``d`` its distance from the
    diagonal, ``h = cos`` a height function on the diagonal circle with two
    critical points, and ``nu`` the unit normal of the curve placed in the
    first complex slot, which is the direction the clean intersection misses.
    """

    curve: FourierCurve
    epsilon: float
    inner: float
    outer: float

    def _frame(self, Q):
        Q = np.asarray(Q, dtype=float)
        dev = wrap(Q - Q[..., :1] + math.pi) - math.pi
        mean = Q[..., 0] + dev.mean(axis=-1)
        e = dev - dev.mean(axis=-1, keepdims=True)
        d = np.linalg.norm(e, axis=-1)
        return mean, e, d

    def bump(self, d):
        return 1.0 - _smooth_step((d - self.inner) / (self.outer - self.inner))

    def _normal(self, mean, second=False):
        _, g1, g2 = curve_values(self.curve, mean, with_second=True)
        nu = 1j * g1 / np.abs(g1)
        if not second:
            return nu
        # d/dm (i g'/|g'|) = i (g'' |g'| - g' d|g'|) / |g'|^2
        dabs = np.real(np.conj(g1) * g2) / np.abs(g1)
        return nu, 1j * (g2 * np.abs(g1) - g1 * dabs) / np.abs(g1) ** 2

    def value(self, Q):
        mean, _, d = self._frame(Q)
        amp = self.epsilon * self.bump(d) * (-np.sin(mean))
        z = amp * self._normal(mean)
        zero = np.zeros_like(z)
        return np.stack([z.real, z.imag, zero.real, zero.real], axis=-1)

    def jacobian(self, Q):
        mean, e, d = self._frame(Q)
        nu, dnu = self._normal(mean, second=True)
        b = self.bump(d)
        width = self.outer - self.inner
        db = -_smooth_step_deriv((d - self.inner) / width) / width
        grad_d = np.where(d[..., None] > 0, e / np.where(d > 0, d, 1.0)[..., None], 0.0)
        hp, hpp = -np.sin(mean), -np.cos(mean)
        # d(mean)/dt_j = 1/4
        dz = (self.epsilon * (db[..., None] * grad_d) * (hp * nu)[..., None]
              + 0.25 * self.epsilon * (b * (hpp * nu + hp * dnu))[..., None])
        zero = np.zeros(dz.shape)
        return np.stack([dz.real, dz.imag, zero, zero], axis=-2)


@dataclass
class DiagonalVerdict:
    epsilon: float
    zeros: List[TorusQuadruple]
    signs: List[int]
    diagonal_only: bool
    off_diagonal_signed_total: Optional[int]

    @property
    def count(self) -> int:
        return len(self.zeros)

    @property
    def total_signed(self) -> Optional[int]:
        if self.off_diagonal_signed_total is None:
            return None
        return self.off_diagonal_signed_total + sum(self.signs)

    @property
    def ok(self) -> bool:
        return self.count == 2 and sorted(self.signs) == [-1, 1] and self.total_signed == 0

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "count": self.count, "zeros": [list(z) for z in self.zeros],
                "signs": self.signs, "diagonal_only": self.diagonal_only,
                "off_diagonal_signed_total": self.off_diagonal_signed_total,
                "total_signed": self.total_signed, "ok": self.ok}


def perturb_diagonal_count(curve: FourierCurve, problem: Problem, epsilon: float, config=None,
                           report=None, n_seeds: int = 64, strict: bool = True) -> DiagonalVerdict:
    """Make the clean circle transverse by a small bump and count the new zeros.

    Seeds are spread along and just off the diagonal; zeros of the perturbed
    system inside the bump's support are merged and signed by the determinant
    of the perturbed Jacobian.  Zeros strictly on the diagonal of the
    unperturbed system (``epsilon = 0``) form a continuum and are not counted.
    """
    from .solver import SolveConfig, cluster, newton_refine, solve

    config = config or SolveConfig()
    outer = config.diag_exclusion / 2.0
    bump = DiagonalBump(curve, float(epsilon), outer / 2.0, outer)

    def res(X):
        return problem.residual(curve, X) + bump.value(X)

    def jac(X):
        return problem.jacobian(curve, X) + bump.jacobian(X)

    base = (np.arange(n_seeds) + 0.5) * (2 * math.pi / n_seeds)
    rng = np.random.default_rng(0)
    offsets = rng.uniform(-0.2 * outer, 0.2 * outer, size=(n_seeds * 4, 4))
    seeds = np.concatenate([np.repeat(base, 4)[:, None] + offsets, np.repeat(base[:, None], 4, axis=1)])
    Q, n = newton_refine(problem, curve, seeds, config.newton_max_iters, residual_fn=res, jacobian_fn=jac)
    _, _, d = bump._frame(Q)
    ok = (n <= config.newton_tol) & (d < outer)
    Q, n = Q[ok], n[ok]
    zeros, signs = [], []
    diagonal_only = False
    if len(Q):
        keep = cluster(Q, n, config.cluster_radius)
        J = jac(Q[keep])
        for q, j in zip(Q[keep], J):
            sv = np.linalg.svd(j, compute_uv=False)
            if sv[-1] < config.sv_ratio_threshold * sv[0]:
                diagonal_only = True
                continue
            zeros.append(TorusQuadruple.of(q))
            signs.append(1 if np.linalg.det(j) > 0 else -1)
        order = sorted(range(len(zeros)), key=lambda k: tuple(zeros[k]))
        zeros, signs = [zeros[k] for k in order], [signs[k] for k in order]
    if report is None and epsilon != 0:
        report = solve(curve, problem, config)
    off = None
    if report is not None and not report.degenerate_family:
        off = signed_total(report.solutions)
    verdict = DiagonalVerdict(float(epsilon), zeros, signs, diagonal_only and not zeros, off)
    if strict and epsilon != 0 and verdict.count != 2:
        raise TopologyError(f"expected 2 zeros near the diagonal, found {verdict.count}", verdict)
    return verdict
