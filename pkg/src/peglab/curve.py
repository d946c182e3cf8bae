"""Closed plane curves given as truncated complex Fourier series.

A curve is ``gamma(t) = sum_k c_k exp(i k t)`` for ``k`` in ``[-m, m]`` and
``t`` in ``[0, 2 pi)``.  Evaluation and derivatives are exact term by term and
vectorize over ``t``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

TWO_PI = 2.0 * np.pi

# embedding heuristic defaults
EMB_MIN_SEPARATION = 0.1
EMB_REL_TOL = 1e-6
EMB_REPORT_MARGIN = 1e-3


class CurveError(ValueError):
    """Invalid curve data or a curve that fails a hypothesis check."""


class NotEmbeddedError(CurveError):
    """Raised when a curve fails the self-intersection check."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


@dataclass(frozen=True)
class FourierCurve:
    """Truncated Fourier series; ``coeffs[j]`` is the coefficient of mode ``j - max_mode``."""

    coeffs: np.ndarray
    max_mode: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise CurveError("coefficient list must have odd length 2m+1")
        if not np.all(np.isfinite(c)):
            raise CurveError("coefficients must be finite")
        m = (c.size - 1) // 2
        nonconst = np.concatenate([c[:m], c[m + 1:]])
        if not np.any(nonconst != 0):
            raise CurveError("curve needs a nonzero coefficient with k != 0")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "max_mode", m)

    @classmethod
    def from_modes(cls, modes: dict) -> "FourierCurve":
        """Build from a ``{k: c_k}`` mapping."""
        m = max(abs(int(k)) for k in modes)
        c = np.zeros(2 * m + 1, dtype=complex)
        for k, v in modes.items():
            c[int(k) + m] = complex(v)
        return cls(c)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.max_mode, self.max_mode + 1)

    def coefficient(self, k: int) -> complex:
        if abs(k) > self.max_mode:
            return 0j
        return complex(self.coeffs[k + self.max_mode])

    def __call__(self, t):
        return evaluate(self, t)

    def __eq__(self, other):
        if not isinstance(other, FourierCurve):
            return NotImplemented
        return self.max_mode == other.max_mode and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def scale(self) -> float:
        """Sum of coefficient magnitudes; bounds ``|gamma(t)|`` from above."""
        return float(np.sum(np.abs(self.coeffs)))

    def diameter(self, n_samples: int = 512) -> float:
        pts = evaluate(self, np.linspace(0.0, TWO_PI, n_samples, endpoint=False))
        return float(np.max(np.abs(pts[:, None] - pts[None, :])))

    def fingerprint(self) -> str:
        payload = json.dumps(curve_to_json(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _phases(curve: FourierCurve, t):
    t = np.asarray(t, dtype=float)
    return t, np.exp(1j * np.multiply.outer(t, curve.modes))


def evaluate(curve: FourierCurve, t):
    """Point(s) ``gamma(t)``; returns a complex scalar for scalar ``t``."""
    t, e = _phases(curve, t)
    if not np.all(np.isfinite(t)):
        raise ValueError("t must be finite")
    out = e @ curve.coeffs
    return complex(out) if out.ndim == 0 else out


def deriv(curve: FourierCurve, t, order: int = 1):
    """Exact derivative ``sum (ik)^order c_k e^{ikt}`` for order 1 or 2."""
    if order not in (1, 2):
        raise ValueError(f"unsupported derivative order {order!r}")
    t, e = _phases(curve, t)
    out = e @ ((1j * curve.modes) ** order * curve.coeffs)
    return complex(out) if out.ndim == 0 else out


def make_ellipse(a: float, b: float) -> FourierCurve:
    """Axis-aligned ellipse ``a cos t + i b sin t``."""
    if not (a > 0 and b > 0):
        raise CurveError("ellipse axes must be positive")
    return FourierCurve(np.array([(a - b) / 2.0, 0.0, (a + b) / 2.0], dtype=complex))


def make_circle(radius: float = 1.0) -> FourierCurve:
    return make_ellipse(radius, radius)


def perturb(curve: FourierCurve, amplitude: float, max_mode: int, seed: int,
            check: bool = True) -> FourierCurve:
    """Add seeded random coefficients of modulus at most ``amplitude``.

    Every mode ``|k| <= max_mode`` receives ``r e^{i theta}`` with ``r`` uniform
    on ``[0, amplitude]`` and ``theta`` uniform on ``[0, 2 pi)``, drawn in
    increasing ``k`` order from ``numpy.random.default_rng(seed)`` (PCG64).
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    if max_mode < 0:
        raise ValueError("max_mode must be nonnegative")
    if amplitude == 0:
        return curve
    m = max(curve.max_mode, max_mode)
    c = np.zeros(2 * m + 1, dtype=complex)
    c[m - curve.max_mode:m + curve.max_mode + 1] = curve.coeffs
    rng = np.random.default_rng(seed)
    n = 2 * max_mode + 1
    r = amplitude * rng.random(n)
    theta = TWO_PI * rng.random(n)
    c[m - max_mode:m + max_mode + 1] += r * np.exp(1j * theta)
    out = FourierCurve(c)
    if check:
        verdict = check_embedded(out)
        if not verdict.embedded:
            raise NotEmbeddedError("perturbed curve is not embedded", verdict)
    return out


def circle_distance(s, t):
    """Distance on the circle ``R / 2 pi Z``."""
    d = np.mod(np.asarray(s) - np.asarray(t), TWO_PI)
    return np.minimum(d, TWO_PI - d)


@dataclass
class EmbeddingVerdict:
    embedded: bool
    worst_pair: Optional[Tuple[float, float, float]]
    samples_used: int
    margin: float = float("nan")

    def to_json(self) -> dict:
        return {
            "embedded": self.embedded,
            "worst_pair": None if self.worst_pair is None else list(self.worst_pair),
            "samples_used": self.samples_used,
            "margin": self.margin,
        }


def check_embedded(curve: FourierCurve, n_samples: int = 512,
                   min_separation: float = EMB_MIN_SEPARATION,
                   rel_tol: float = EMB_REL_TOL, n_refine: int = 8) -> EmbeddingVerdict:
    """Sampling test for self-intersections, refined by local minimization.

    Heuristic: a pass is evidence, not proof.  Pairs of parameters closer than
    ``min_separation`` on the circle are ignored; a refined pair whose points
    are closer than ``rel_tol * diameter`` is a crossing.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    t = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    pts = evaluate(curve, t)
    dist = np.abs(pts[:, None] - pts[None, :])
    diam = float(dist.max())
    sep = circle_distance(t[:, None], t[None, :])
    dist[sep < min_separation] = np.inf
    iu = np.triu_indices(n_samples, 1)
    flat = dist[iu]
    order = np.argsort(flat, kind="stable")[:n_refine]

    def sqdist(x):
        return abs(evaluate(curve, x[0]) - evaluate(curve, x[1])) ** 2

    best = None
    for idx in order:
        if not np.isfinite(flat[idx]):
            break
        x0 = np.array([t[iu[0][idx]], t[iu[1][idx]]])
        res = minimize(sqdist, x0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 2000})
        x = res.x if circle_distance(res.x[0], res.x[1]) >= 0.5 * min_separation else x0
        d = abs(evaluate(curve, x[0]) - evaluate(curve, x[1]))
        if best is None or d < best[2]:
            best = (float(np.mod(x[0], TWO_PI)), float(np.mod(x[1], TWO_PI)), float(d))
    if best is None:
        return EmbeddingVerdict(True, None, n_samples, float("inf"))
    margin = best[2] / diam
    embedded = best[2] >= rel_tol * diam
    worst = best if (not embedded or margin < EMB_REPORT_MARGIN) else None
    return EmbeddingVerdict(embedded, worst, n_samples, margin)


def curve_to_json(curve: FourierCurve) -> dict:
    return {
        "type": "fourier",
        "max_mode": curve.max_mode,
        "coeffs": [[float(z.real), float(z.imag)] for z in curve.coeffs],
    }


def curve_from_json(obj: dict) -> FourierCurve:
    kind = obj.get("type")
    if kind == "fourier":
        coeffs = [complex(re, im) for re, im in obj["coeffs"]]
        m = int(obj.get("max_mode", (len(coeffs) - 1) // 2))
        if len(coeffs) != 2 * m + 1:
            raise CurveError(f"expected {2 * m + 1} coefficients for max_mode {m}")
        return FourierCurve(np.array(coeffs))
    if kind == "ellipse":
        return make_ellipse(float(obj["a"]), float(obj["b"]))
    if kind == "circle":
        return make_circle(float(obj.get("r", 1.0)))
    raise CurveError(f"unknown curve type {kind!r}")


def load_curve(path) -> FourierCurve:
    with open(path) as fh:
        return curve_from_json(json.load(fh))
