"""Report emission: JSON, delimited tables, SVG drawings and matplotlib figures."""

from __future__ import annotations

import csv
import json
import math
from typing import Iterable, List, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .curve import evaluate
from .solver import SolveReport

SIGN_COLORS = {1: "#c0392b", -1: "#2471a3", None: "#7d3c98"}
SVG_SIZE = 600
SVG_MARGIN = 0.10


# --- JSON -----------------------------------------------------------------------

def dumps_report(report: SolveReport, include_timing: bool = False) -> str:
    return json.dumps(report.to_json(include_timing=include_timing), indent=2, sort_keys=True)


def write_report(report: SolveReport, path: str, include_timing: bool = False) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_report(report, include_timing) + "\n")


def read_report(path: str) -> SolveReport:
    with open(path) as fh:
        return SolveReport.from_json(json.load(fh))


# --- CSV ------------------------------------------------------------------------

def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def orbit_rows(report: SolveReport):
    header = ["orbit", "kind", "orbit_sign", "members", "s", "t", "phi",
              "ax", "ay", "bx", "by", "cx", "cy", "dx", "dy"]
    rows = []
    for k, o in enumerate(report.orbits):
        verts = [c for v in o.peg.vertices for c in (v.real, v.imag)]
        rows.append([k, o.peg.kind, o.orbit_sign, len(o.members), o.peg.data.s, o.peg.data.t,
                     o.peg.data.phi] + verts)
    return header, rows


# --- SVG ------------------------------------------------------------------------

class _Frame:
    """Curve bounding box plus margin, y flipped so the picture is mathematically oriented."""

    def __init__(self, pts: np.ndarray, size: int = SVG_SIZE, margin: float = SVG_MARGIN):
        lo = np.array([pts.real.min(), pts.imag.min()])
        hi = np.array([pts.real.max(), pts.imag.max()])
        span = max(hi - lo)
        pad = margin * span
        self.lo = lo - pad
        self.span = span + 2 * pad
        self.size = size

    def __call__(self, z: complex):
        x = (z.real - self.lo[0]) / self.span * self.size
        y = self.size - (z.imag - self.lo[1]) / self.span * self.size
        return x, y


def render_svg(report: SolveReport, n_samples: int = 400, max_family_marks: int = 400) -> str:
    """One ``<path>`` for the curve and one ``<polygon>`` per orbit; diagonals as lines."""
    curve = report.get_curve()
    t = np.linspace(0.0, 2 * math.pi, n_samples, endpoint=False)
    pts = np.asarray(evaluate(curve, t))
    fr = _Frame(pts)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{fr.size}" height="{fr.size}" '
           f'viewBox="0 0 {fr.size} {fr.size}">',
           '<rect width="100%" height="100%" fill="white"/>']
    d = " ".join(("M" if i == 0 else "L") + "{:.3f},{:.3f}".format(*fr(z)) for i, z in enumerate(pts))
    out.append(f'<path d="{d} Z" fill="none" stroke="black" stroke-width="1.5"/>')
    if report.degenerate_family and report.chain:
        step = max(1, len(report.chain) // max_family_marks)
        for q in report.chain[::step]:
            for z in evaluate(curve, np.array(tuple(q))):
                x, y = fr(complex(z))
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="#f5b041" fill-opacity="0.35"/>')
    for k, o in enumerate(report.orbits):
        color = SIGN_COLORS.get(o.orbit_sign, SIGN_COLORS[None])
        A, B, C, D = o.peg.vertices
        poly = " ".join("{:.3f},{:.3f}".format(*fr(v)) for v in (A, B, C, D))
        out.append(f'<polygon points="{poly}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for u, v in ((A, C), (B, D)):
            (x1, y1), (x2, y2) = fr(u), fr(v)
            out.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                       f'stroke="{color}" stroke-dasharray="4,3" stroke-width="0.8"/>')
        x, y = fr(o.peg.diag_point)
        sign = {1: "+", -1: "-", None: "mixed"}[o.orbit_sign]
        out.append(f'<text x="{x + 4:.1f}" y="{y - 4:.1f}" font-size="12" fill="{color}">'
                   f'{escape(f"orbit {k} ({sign})")}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(report: SolveReport, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(render_svg(report))


# --- matplotlib figures ---------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_pegs(report: SolveReport, path: str) -> None:
    plt = _pyplot()
    curve = report.get_curve()
    t = np.linspace(0, 2 * math.pi, 400)
    z = np.asarray(evaluate(curve, t))
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(z.real, z.imag, "k-", lw=1.2)
    for k, o in enumerate(report.orbits):
        v = np.array(o.peg.vertices + (o.peg.vertices[0],))
        ax.plot(v.real, v.imag, "-", color=SIGN_COLORS.get(o.orbit_sign, SIGN_COLORS[None]),
                label=f"orbit {k}")
    ax.set_aspect("equal")
    if report.orbits:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scan(phis: Sequence[float], counts: Sequence[int], path: str, paths: Optional[List] = None) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2 if paths else 1, figsize=(9 if paths else 5, 4), squeeze=False)
    ax = axes[0, 0]
    ax.step(phis, counts, where="mid")
    ax.set_xlabel("phi (rad)")
    ax.set_ylabel("orbits")
    ax.set_ylim(bottom=0)
    if paths:
        ax2 = axes[0, 1]
        for track in paths:
            arr = np.array([v for v in track if v is not None])
            if len(arr):
                ax2.plot(arr.real, arr.imag, ".-", ms=2)
        ax2.set_aspect("equal")
        ax2.set_title("first vertex per orbit")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_doubling(rows: Sequence[dict], path: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for phi in sorted({r["phi"] for r in rows}):
        sub = [r for r in rows if r["phi"] == phi]
        ax.plot([r["member"] for r in sub], [r["orbits"] for r in sub], "o", label=f"phi={phi:.3g}")
    ax.axhline(2, color="grey", ls="--", lw=0.8)
    ax.set_xlabel("family member")
    ax.set_ylabel("orbits")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
