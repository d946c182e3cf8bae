"""Batch drivers: doubling over a perturbed family and continuation in phi."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .curve import FourierCurve, perturb
from .geometry import _diameter
from .intersection import TopologyError, topology_block
from .residual import Problem
from .solver import OrbitIntegrityError, SolveConfig, SolveReport, solve

log = logging.getLogger(__name__)


def family_members(base: FourierCurve, amplitude: float, size: int, seed: int, max_mode: int = 5):
    """``size`` perturbations of ``base`` with seeds ``seed, seed+1, ...``; amplitude 0 gives the base."""
    if amplitude == 0:
        return [base] * size
    return [perturb(base, amplitude, max_mode, seed + i) for i in range(size)]


@dataclass
class DoublingSummary:
    rows: List[dict]
    min_orbits: Optional[int]
    degenerate_runs: List[dict]
    all_signed_zero: bool

    def to_json(self) -> dict:
        return {"rows": self.rows, "min_orbits": self.min_orbits, "degenerate_runs": self.degenerate_runs,
                "degenerate_count": len(self.degenerate_runs), "all_signed_zero": self.all_signed_zero}


def verify_doubling(curves: Sequence[FourierCurve], problems: Sequence[Problem],
                    config: Optional[SolveConfig] = None, reports: Optional[list] = None) -> DoublingSummary:
    """Solve every (curve, problem) pair and summarize orbit counts and signed totals.

    Degenerate runs are listed and kept out of the minimum.
    """
    config = config or SolveConfig()
    rows, degenerate = [], []
    for i, curve in enumerate(curves):
        for problem in problems:
            rep = solve(curve, problem, config)
            if reports is not None:
                reports.append(rep)
            row = {"member": i, "phi": problem.phi, "right_angle": problem.right_angle,
                   "orbits": len(rep.orbits), "raw": rep.raw_solution_count,
                   "signed_total": rep.signed_total, "transverse": not (rep.degenerate_family
                                                                          or rep.isolated_degeneracies),
                   "euler_chi": None, "doubling_certificate": None, "fingerprint": rep.curve_fingerprint}
            if row["transverse"]:
                try:
                    topo = topology_block(rep, strict=False)
                    row["euler_chi"] = topo["euler_chi"]
                    row["doubling_certificate"] = topo["doubling_certificate"]
                except TopologyError as exc:
                    row["doubling_certificate"] = f"error: {exc}"
            else:
                degenerate.append({"member": i, "phi": problem.phi, "warnings": rep.warnings})
            rows.append(row)
    clean = [r for r in rows if r["transverse"]]
    return DoublingSummary(rows, min((r["orbits"] for r in clean), default=None), degenerate,
                           all(r["signed_total"] == 0 for r in clean))


# --- continuation in phi ---------------------------------------------------------

def _set_distance(a, b) -> float:
    """Hausdorff distance between two vertex sets."""
    a, b = np.asarray(a), np.asarray(b)
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


@dataclass
class ScanTrace:
    phis: List[float]
    counts: List[int]
    fresh_solves: List[float]
    tracks: List[List[Optional[list]]] = field(default_factory=list)
    max_jump: float = 0.0
    jump_bound: float = 0.0
    max_jump_ratio: float = 0.0

    @property
    def continuous(self) -> bool:
        # every step's vertex jump stays under 10 x (phi step) x diameter
        return self.max_jump_ratio < 1.0

    def first_vertex_paths(self):
        return [[None if v is None else complex(*v[0]) for v in tr] for tr in self.tracks]

    def to_json(self) -> dict:
        return {"phis": self.phis, "counts": self.counts, "fresh_solves": self.fresh_solves,
                "tracks": self.tracks, "max_jump": self.max_jump, "jump_bound": self.jump_bound,
                "max_jump_ratio": self.max_jump_ratio,
                "continuous": self.continuous}


def scan_phi(curve: FourierCurve, phis: Sequence[float], config: Optional[SolveConfig] = None,
             on_report=None) -> ScanTrace:
    """Sweep phi, warm-starting Newton from the previous solutions.

    A fresh grid solve replaces the warm start whenever the orbit count changes
    or a symmetry partner goes missing.
    """
    config = config or SolveConfig()
    phis = [float(p) for p in phis]
    if any(not (0 < p < math.pi / 2) for p in phis):
        raise ValueError("scan range must lie inside (0, pi/2)")
    diam = _diameter(curve)
    trace = ScanTrace(phis, [], [])
    prev: Optional[SolveReport] = None
    tracks: List[List[Optional[list]]] = []
    for k, phi in enumerate(phis):
        problem = Problem.rectangle(phi)
        rep = None
        if prev is not None and prev.orbits:
            seeds = np.array([m.q for m in prev.solutions])
            try:
                rep = solve(curve, problem, config, check_curve=False, seeds=seeds)
                if len(rep.orbits) != len(prev.orbits):
                    rep = None
            except OrbitIntegrityError:
                rep = None
        if rep is None:
            log.info("fresh grid solve at phi=%.6f", phi)
            trace.fresh_solves.append(phi)
            rep = solve(curve, problem, config, check_curve=(k == 0))
        if on_report is not None:
            on_report(rep)
        verts = [[[v.real, v.imag] for v in o.peg.vertices] for o in rep.orbits]
        if prev is None or not tracks:
            tracks = [[None] * k + [v] for v in verts]
        else:
            step_bound = 10 * abs(phi - phis[k - 1]) * diam
            trace.jump_bound = max(trace.jump_bound, step_bound)
            used = set()
            for tr in tracks:
                last = tr[-1]
                best, best_d = None, math.inf
                if last is not None:
                    for j, v in enumerate(verts):
                        if j in used:
                            continue
                        d = _set_distance([complex(*p) for p in last], [complex(*p) for p in v])
                        if d < best_d:
                            best, best_d = j, d
                if best is None:
                    tr.append(None)
                else:
                    used.add(best)
                    tr.append(verts[best])
                    trace.max_jump = max(trace.max_jump, best_d)
                    trace.max_jump_ratio = max(trace.max_jump_ratio, best_d / step_bound)
            for j, v in enumerate(verts):
                if j not in used:
                    tracks.append([None] * k + [v])
        trace.counts.append(len(rep.orbits))
        prev = rep
    trace.tracks = tracks
    return trace
