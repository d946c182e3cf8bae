"""Multistart Newton search for all off-diagonal zeros on the 4-torus.

Pipeline: seed a uniform grid, refine every seed with damped Newton (wrapping
angles each step), keep converged off-diagonal points, merge duplicates,
classify transversality by singular values, sign the transverse ones, and
quotient by the relabeling symmetries of a peg.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .curve import TWO_PI, FourierCurve, NotEmbeddedError, check_embedded, curve_from_json, curve_to_json
from .geometry import (ComplexPair, Peg, extract_quad, extract_rectangle, point_L, point_T2)
from .residual import (Problem, TorusQuadruple, min_pair_separation, sigma, tau,
                       torus_distance, wrap)

log = logging.getLogger(__name__)

# fractional offset of the seed grid inside each cell; keeps seeds off symmetry axes
GRID_OFFSET = 0.37
MAX_HALVINGS = 20
MAX_STEP = 1.0
CHAIN_ADJACENCY = 3.0
COLLAPSE_REL = 1e-6
COLLAPSE_CELL = 1e-4
REFINE_CHUNK = 16384
TRACE_STEP = 0.02
TRACE_MAX_STEPS = 2000


class OrbitIntegrityError(RuntimeError):
    """A symmetry partner predicted by the peg correspondence could not be found."""


@dataclass(frozen=True)
class SolveConfig:
    grid_per_axis: int = 24
    newton_max_iters: int = 60
    newton_tol: float = 1e-11
    cluster_radius: float = 1e-3
    diag_exclusion: float = 0.05
    sv_ratio_threshold: float = 1e-6
    degenerate_chain_min: int = 20
    workers: int = 1

    def __post_init__(self):
        for name in ("grid_per_axis", "newton_max_iters", "newton_tol", "cluster_radius",
                     "diag_exclusion", "sv_ratio_threshold", "degenerate_chain_min", "workers"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.newton_tol < self.cluster_radius < self.diag_exclusion:
            raise ValueError("need newton_tol < cluster_radius < diag_exclusion")

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("workers")  # scheduling must not leak into reports
        return out


def default_workers() -> int:
    env = os.environ.get("PEGLAB_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


@dataclass
class Solution:
    quadruple: TorusQuadruple
    point: ComplexPair
    residual_norm: float
    sv_min: float = float("nan")
    sv_max: float = float("nan")
    transverse: bool = False
    sign: Optional[int] = None

    @property
    def q(self) -> np.ndarray:
        return self.quadruple.as_array()

    def to_json(self) -> dict:
        return {
            "quadruple": list(self.quadruple),
            "point": [[self.point.z1.real, self.point.z1.imag], [self.point.z2.real, self.point.z2.imag]],
            "residual_norm": self.residual_norm,
            "sv_min": self.sv_min,
            "sv_max": self.sv_max,
            "transverse": self.transverse,
            "sign": self.sign,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Solution":
        (a, b), (c, d) = obj["point"]
        return cls(TorusQuadruple(*obj["quadruple"]), ComplexPair(complex(a, b), complex(c, d)),
                   obj["residual_norm"], obj["sv_min"], obj["sv_max"], obj["transverse"], obj["sign"])


@dataclass
class PegOrbit:
    members: List[Solution]
    peg: Peg
    orbit_sign: Optional[int]
    representative: Solution

    def to_json(self) -> dict:
        return {
            "members": [m.to_json() for m in self.members],
            "peg": self.peg.to_json(),
            "orbit_sign": self.orbit_sign,
            "representative": self.members.index(self.representative),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PegOrbit":
        members = [Solution.from_json(m) for m in obj["members"]]
        return cls(members, Peg.from_json(obj["peg"]), obj["orbit_sign"], members[obj["representative"]])


@dataclass
class DegeneracyVerdict:
    family: bool
    chain: List[TorusQuadruple] = field(default_factory=list)
    isolated: List[Solution] = field(default_factory=list)


@dataclass
class SolveReport:
    problem: Problem
    orbits: List[PegOrbit]
    raw_solution_count: int
    signed_total: Optional[int]
    degenerate_family: bool
    chain: List[TorusQuadruple]
    isolated_degeneracies: List[Solution]
    config: dict
    curve: dict
    curve_fingerprint: str
    timing: dict = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    topology: Optional[dict] = None

    @property
    def solutions(self) -> List[Solution]:
        return [m for o in self.orbits for m in o.members]

    def to_json(self, include_timing: bool = False) -> dict:
        out = {
            "problem": self.problem.to_json(),
            "orbits": [o.to_json() for o in self.orbits],
            "raw_solution_count": self.raw_solution_count,
            "signed_total": self.signed_total,
            "degenerate_family": self.degenerate_family,
            "chain": [list(q) for q in self.chain],
            "isolated_degeneracies": [s.to_json() for s in self.isolated_degeneracies],
            "config": self.config,
            "curve": self.curve,
            "curve_fingerprint": self.curve_fingerprint,
            "warnings": list(self.warnings),
        }
        if include_timing:
            out["timing"] = self.timing
        if self.topology is not None:
            out["topology"] = self.topology
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SolveReport":
        return cls(
            problem=Problem.from_json(obj["problem"]),
            orbits=[PegOrbit.from_json(o) for o in obj["orbits"]],
            raw_solution_count=obj["raw_solution_count"],
            signed_total=obj["signed_total"],
            degenerate_family=obj["degenerate_family"],
            chain=[TorusQuadruple(*q) for q in obj.get("chain", [])],
            isolated_degeneracies=[Solution.from_json(s) for s in obj.get("isolated_degeneracies", [])],
            config=obj.get("config", {}),
            curve=obj["curve"],
            curve_fingerprint=obj.get("curve_fingerprint", ""),
            timing=obj.get("timing", {}),
            warnings=list(obj.get("warnings", [])),
            topology=obj.get("topology"),
        )

    def get_curve(self) -> FourierCurve:
        return curve_from_json(self.curve)


# --- Newton -------------------------------------------------------------------

def _pinv_step(J, F):
    """Newton step ``-J^+ F``; plain solve where ``J`` is well conditioned."""
    step = np.empty_like(F)
    scale = np.max(np.abs(J), axis=(1, 2))
    det = np.linalg.det(J)
    good = np.abs(det) > 1e-8 * np.maximum(scale, 1e-300) ** 4
    if good.any():
        step[good] = -np.linalg.solve(J[good], F[good][..., None])[..., 0]
    bad = ~good
    if bad.any():
        U, S, Vt = np.linalg.svd(J[bad])
        cut = 1e-13 * S[:, :1]
        inv = np.where(S > cut, 1.0 / np.where(S > cut, S, 1.0), 0.0)
        coef = inv * np.einsum("nji,nj->ni", U, F[bad])
        step[bad] = -np.einsum("nji,nj->ni", Vt, coef)
    return step


def newton_refine(problem: Problem, curve: FourierCurve, Q0, max_iters: int = 60,
                  stop_tol: Optional[float] = None, residual_fn=None, jacobian_fn=None,
                  diag_cut: Optional[float] = None):
    """Damped Newton on the torus for a batch of starting points.

    Steps use the pseudo-inverse so rank-deficient points (degenerate families)
    still converge onto the zero set.  Each step is halved until the residual
    norm decreases, at most ``MAX_HALVINGS`` times; a point that cannot
    decrease is frozen.  Returns ``(Q, norms)`` with angles in ``[0, 2 pi)``.

    Once a point is inside the quadratic basin (residual below ``COLLAPSE_REL``
    of the curve scale) it is merged with any other basin point in the same
    ``COLLAPSE_CELL`` box and inherits that point's final value.  With
    ``diag_cut`` set, basin points closer than that to the small diagonal are
    frozen, since the caller will reject them anyway.
    """
    if residual_fn is None:
        residual_fn = lambda X: problem.residual(curve, X)  # noqa: E731
        both_fn = lambda X: problem.residual_and_jacobian(curve, X)  # noqa: E731
    else:
        both_fn = lambda X: (residual_fn(X), jacobian_fn(X))  # noqa: E731
    if stop_tol is None:
        stop_tol = 1e-14 * max(1.0, curve.scale())
    Q = wrap(np.array(Q0, dtype=float, ndmin=2))
    nrm = np.linalg.norm(residual_fn(Q), axis=1)
    active = nrm > stop_tol
    alias = np.arange(len(Q))
    collapse_tol = COLLAPSE_REL * max(1.0, curve.scale())
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        F, J = both_fn(Q[idx])
        step = _pinv_step(J, F)
        big = np.max(np.abs(step), axis=1)
        step *= np.minimum(1.0, MAX_STEP / np.maximum(big, 1e-300))[:, None]
        base_q, base_n = Q[idx], nrm[idx]
        lam = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        new_q, new_n = base_q.copy(), base_n.copy()
        for _h in range(MAX_HALVINGS + 1):
            p = np.flatnonzero(pending)
            if p.size == 0:
                break
            trial = base_q[p] + lam[p, None] * step[p]
            tn = np.linalg.norm(residual_fn(trial), axis=1)
            ok = tn < base_n[p]
            new_q[p[ok]] = trial[ok]
            new_n[p[ok]] = tn[ok]
            pending[p[ok]] = False
            lam[p[~ok]] *= 0.5
        Q[idx] = wrap(new_q)
        nrm[idx] = new_n
        stalled = idx[pending]
        active[stalled] = False
        active &= nrm > stop_tol
        basin = np.flatnonzero(active & (nrm < collapse_tol))
        if diag_cut is not None and basin.size:
            near_diag = min_pair_separation(Q[basin]) < diag_cut
            active[basin[near_diag]] = False
            basin = basin[~near_diag]
        if basin.size > 1:
            keys = np.floor(Q[basin] / COLLAPSE_CELL).astype(np.int64)
            _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
            rep = basin[first[inverse.ravel()]]
            dup = rep != basin
            alias[basin[dup]] = rep[dup]
            active[basin[dup]] = False
    while True:
        nxt = alias[alias]
        if np.array_equal(nxt, alias):
            break
        alias = nxt
    Q, nrm = Q[alias], nrm[alias]
    Q[Q >= TWO_PI] = 0.0
    return Q, nrm


def seed_grid(n: int, diag_exclusion: float) -> np.ndarray:
    axis = (np.arange(n) + GRID_OFFSET) * (TWO_PI / n)
    Q = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 4)
    return Q[min_pair_separation(Q) >= diag_exclusion]


def _refine_chunk(args):
    problem, curve, Q, iters, cut = args
    return newton_refine(problem, curve, Q, iters, diag_cut=cut)


def refine_seeds(problem, curve, seeds, config: SolveConfig):
    """Refine all seeds, optionally over a process pool.

    Seeds are cut into fixed-size chunks whatever the worker count, so the
    output does not depend on how many processes ran it.
    """
    cut = config.diag_exclusion / 2
    chunks = [seeds[i:i + REFINE_CHUNK] for i in range(0, len(seeds), REFINE_CHUNK)] or [seeds]
    jobs = [(problem, curve, c, config.newton_max_iters, cut) for c in chunks]
    if config.workers <= 1 or len(chunks) == 1:
        parts = [_refine_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_refine_chunk, jobs))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# --- clustering ---------------------------------------------------------------

def canonical_order(Q, norms=None):
    """Indices sorting by residual, then lexicographically by quadruple."""
    Q = np.asarray(Q)
    keys = [Q[:, 3], Q[:, 2], Q[:, 1], Q[:, 0]]
    if norms is not None:
        keys.append(np.asarray(norms))
    return np.lexsort(keys)


def _tree(Q):
    Q = np.array(Q, dtype=float, ndmin=2)
    Q = wrap(Q)
    Q[Q >= TWO_PI] = 0.0
    return cKDTree(Q, boxsize=TWO_PI)


def cluster(Q, norms, radius: float):
    """Greedy merge within ``radius``; the lowest residual of each cluster survives."""
    if len(Q) == 0:
        return np.zeros(0, dtype=int)
    tree = _tree(Q)
    removed = np.zeros(len(Q), dtype=bool)
    keep = []
    for i in canonical_order(Q, norms):
        if removed[i]:
            continue
        keep.append(i)
        removed[tree.query_ball_point(Q[i], radius)] = True
    return np.array(keep, dtype=int)


# --- classification -----------------------------------------------------------

def classify_transversality(solution: Solution, jacobian, config: SolveConfig) -> Solution:
    sv = np.linalg.svd(np.asarray(jacobian, dtype=float), compute_uv=False)
    solution.sv_max = float(sv[0])
    solution.sv_min = float(sv[-1])
    solution.transverse = bool(sv[-1] >= config.sv_ratio_threshold * sv[0])
    return solution


def ambient_point(curve, problem: Problem, q) -> ComplexPair:
    t1, t2, t3, t4 = q
    if problem.kind == "rectangle":
        return point_L(curve, t1, t2)
    return point_T2(curve, problem.data, t3, t4)


def make_solutions(curve, problem, Q, norms, config) -> List[Solution]:
    from .intersection import DegenerateIntersectionError, orientation_sign

    if len(Q) == 0:
        return []
    J = problem.jacobian(curve, Q)
    out = []
    for q, n, j in zip(Q, norms, J):
        sol = Solution(TorusQuadruple.of(q), ambient_point(curve, problem, q), float(n))
        classify_transversality(sol, j, config)
        if sol.transverse:
            try:
                sol.sign = orientation_sign(curve, problem, sol.quadruple)
            except DegenerateIntersectionError:
                sol.transverse = False
        out.append(sol)
    return out


def trace_null_direction(curve, problem, q0, config: SolveConfig, step: float = TRACE_STEP,
                         max_steps: int = TRACE_MAX_STEPS):
    """Follow a rank-deficient solution along its Jacobian kernel.

    Predictor: move ``step`` along the kernel vector, keeping its orientation
    continuous.  Corrector: pseudo-inverse Newton.  Stops when the path closes,
    the corrector fails, the Jacobian regains full rank, or the path runs
    into the diagonal.  Returns the visited quadruples in path order.
    """
    path = [wrap(np.asarray(q0, dtype=float))]
    for direction in (1.0, -1.0):
        q = path[0]
        prev_v = None
        out = []
        for k in range(max_steps):
            J = problem.jacobian(curve, q)
            _, sv, Vt = np.linalg.svd(J)
            if sv[-1] >= config.sv_ratio_threshold * sv[0]:
                break
            v = Vt[-1]
            if prev_v is None:
                v = direction * v
            elif v @ prev_v < 0:
                v = -v
            Q, n = newton_refine(problem, curve, (q + step * v)[None, :], config.newton_max_iters)
            if n[0] > config.newton_tol or min_pair_separation(Q[0]) < config.diag_exclusion:
                break
            q, prev_v = Q[0], v
            if k > 2 and torus_distance(q, path[0]) < 0.75 * step:
                return path + out, True
            out.append(q)
        if direction > 0:
            path = path + out
        else:
            path = out[::-1] + path
    return path, False


def detect_degenerate_family(solutions: Sequence[Solution], config: SolveConfig, curve=None,
                             problem=None) -> DegeneracyVerdict:
    """Decide whether the non-transverse solutions form a positive-dimensional family.

    With ``curve`` and ``problem`` each unexplained degenerate solution is
    traced along its kernel direction; a traced path of at least
    ``degenerate_chain_min`` points is a family and absorbs the degenerate
    solutions near it.  Without them, degenerate solutions are chained by
    proximity alone.
    """
    bad = [s for s in solutions if not s.transverse]
    if not bad:
        return DegeneracyVerdict(False)
    Q = np.array([s.q for s in bad])
    if curve is None or problem is None:
        return _proximity_family(bad, Q, config)
    absorbed = np.zeros(len(bad), dtype=bool)
    chain = []
    tree = _tree(Q)
    for i in canonical_order(Q, [s.residual_norm for s in bad]):
        if absorbed[i]:
            continue
        path, _closed = trace_null_direction(curve, problem, Q[i], config)
        if len(path) < config.degenerate_chain_min:
            continue
        path = np.array(path)
        for j in tree.query_ball_point(path, 2 * TRACE_STEP):
            absorbed[j] = True
        absorbed[i] = True
        chain.extend(path)
    isolated = [bad[i] for i in range(len(bad)) if not absorbed[i]]
    chain_q = [TorusQuadruple.of(q) for q in chain]
    return DegeneracyVerdict(bool(chain_q), chain_q, isolated)


def _proximity_family(bad, Q, config) -> DegeneracyVerdict:
    pairs = _tree(Q).query_pairs(CHAIN_ADJACENCY * config.cluster_radius, output_type="ndarray")
    from scipy.sparse import coo_matrix

    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(bad), len(bad)))
    _, labels = connected_components(graph, directed=False)
    sizes = np.bincount(labels)
    family_labels = set(np.flatnonzero(sizes >= config.degenerate_chain_min).tolist())
    chain_idx = [i for i in range(len(bad)) if labels[i] in family_labels]
    isolated = [bad[i] for i in range(len(bad)) if labels[i] not in family_labels]
    chain_idx = [chain_idx[k] for k in canonical_order(Q[chain_idx])] if chain_idx else []
    return DegeneracyVerdict(bool(chain_idx), [bad[i].quadruple for i in chain_idx], isolated)


# --- symmetry quotient --------------------------------------------------------

def group_images(problem: Problem, q) -> List[np.ndarray]:
    """Nontrivial relabelings of ``q`` that describe the same peg."""
    q = np.asarray(q, dtype=float)
    if problem.group_order == 1:
        return []
    if problem.group_order == 2:
        return [wrap(tau(q))]
    return [wrap(sigma(q)), wrap(tau(q)), wrap(sigma(tau(q)))]


def _find(tree, q, radius):
    d, i = tree.query(wrap(q), k=1)
    return int(i) if d <= radius else None


def recover_partners(curve, problem, solutions: List[Solution], config: SolveConfig) -> List[Solution]:
    """Add symmetry images missing from the solution list by refining the exact image."""
    if problem.group_order == 1 or not solutions:
        return solutions
    sols = list(solutions)
    for _ in range(2):
        tree = _tree([s.q for s in sols])
        missing = []
        for s in sols:
            for img in group_images(problem, s.q):
                if _find(tree, img, config.cluster_radius) is None:
                    missing.append(img)
        if not missing:
            return sols
        Q, n = newton_refine(problem, curve, np.array(missing), config.newton_max_iters)
        ok = (n <= config.newton_tol) & (min_pair_separation(Q) >= config.diag_exclusion)
        Q, n = Q[ok], n[ok]
        keep = cluster(Q, n, config.cluster_radius)
        new = make_solutions(curve, problem, Q[keep], n[keep], config)
        existing = _tree([s.q for s in sols])
        for s in new:
            if _find(existing, s.q, config.cluster_radius) is None:
                log.info("recovered missing symmetry partner %s", tuple(s.quadruple))
                sols.append(s)
    return sols


def _peg_for(curve, problem, q, config):
    tol = max(config.newton_tol, 1e-12)
    if problem.kind == "rectangle":
        return extract_rectangle(curve, problem.phi, q, residual_tol=10 * tol)
    return extract_quad(curve, problem.data, q, residual_tol=10 * tol)


def quotient_symmetry(solutions: Sequence[Solution], problem: Problem, config: SolveConfig,
                      curve: Optional[FourierCurve] = None) -> List[PegOrbit]:
    """Group transverse-or-not solutions into orbits of the relabeling group."""
    sols = list(solutions)
    if not sols:
        return []
    order = problem.group_order
    tree = _tree([s.q for s in sols])
    parent = list(range(len(sols)))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, s in enumerate(sols):
        for img in group_images(problem, s.q):
            j = _find(tree, img, config.cluster_radius)
            if j is None:
                raise OrbitIntegrityError(f"missing symmetry partner of {tuple(s.quadruple)}")
            parent[root(j)] = root(i)
    groups = {}
    for i in range(len(sols)):
        groups.setdefault(root(i), []).append(sols[i])
    orbits = []
    for members in groups.values():
        if len(members) != order:
            raise OrbitIntegrityError(f"orbit of size {len(members)}, expected {order}")
        members.sort(key=lambda s: tuple(s.quadruple))
        rep = members[0]
        signs = {m.sign for m in members}
        orbit_sign = signs.pop() if len(signs) == 1 else None
        peg = _peg_for(curve, problem, rep.quadruple, config) if curve is not None else None
        orbits.append(PegOrbit(members, peg, orbit_sign, rep))
    orbits.sort(key=lambda o: tuple(o.representative.quadruple))
    return orbits


# --- driver -------------------------------------------------------------------

def collect_solutions(curve, problem, config, seeds=None) -> List[Solution]:
    """Refine seeds and return deduplicated accepted solutions in canonical order."""
    if seeds is None:
        seeds = seed_grid(config.grid_per_axis, config.diag_exclusion)
    Q, n = refine_seeds(problem, curve, seeds, config)
    ok = (n <= config.newton_tol) & (min_pair_separation(Q) >= config.diag_exclusion)
    Q, n = Q[ok], n[ok]
    keep = cluster(Q, n, config.cluster_radius)
    keep = keep[canonical_order(Q[keep])]
    return make_solutions(curve, problem, Q[keep], n[keep], config)


def solve(curve: FourierCurve, problem: Problem, config: Optional[SolveConfig] = None,
          check_curve: bool = True, seeds=None) -> SolveReport:
    """Find all off-diagonal solutions for ``problem`` on ``curve`` and assemble a report."""
    config = config or SolveConfig()
    timing = {}
    t0 = time.perf_counter()
    if check_curve:
        verdict = check_embedded(curve)
        if not verdict.embedded:
            raise NotEmbeddedError("curve fails the embedding check", verdict)
    timing["embedding_check"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    sols = collect_solutions(curve, problem, config, seeds)
    timing["newton"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    degeneracy = detect_degenerate_family(sols, config, curve, problem)
    transverse = [s for s in sols if s.transverse]
    transverse = recover_partners(curve, problem, transverse, config)
    transverse = [s for s in transverse if s.transverse]
    orbits = quotient_symmetry(transverse, problem, config, curve)
    timing["classify"] = time.perf_counter() - t2

    raw = sum(len(o.members) for o in orbits)
    signed = sum(m.sign for o in orbits for m in o.members)
    warnings = []
    if degeneracy.family:
        warnings.append(f"degenerate family of {len(degeneracy.chain)} non-transverse solutions")
    if degeneracy.isolated:
        warnings.append(f"{len(degeneracy.isolated)} isolated non-transverse solutions")
    if not orbits and problem.kind == "rectangle" and not degeneracy.family:
        warnings.append("no off-diagonal solutions found; existence is guaranteed, so the search "
                        "may be too coarse")
    timing["total"] = time.perf_counter() - t0
    return SolveReport(
        problem=problem,
        orbits=orbits,
        raw_solution_count=raw,
        signed_total=signed,
        degenerate_family=degeneracy.family,
        chain=degeneracy.chain,
        isolated_degeneracies=degeneracy.isolated,
        config=config.to_json(),
        curve=curve_to_json(curve),
        curve_fingerprint=curve.fingerprint(),
        timing=timing,
        warnings=warnings,
    )
