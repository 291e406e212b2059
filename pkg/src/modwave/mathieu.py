"""Stability of a single parametrically driven oscillator.

Integrates ``u' = p, p' = -(delta + eps cos t) u`` over ``2 pi`` and
classifies the monodromy by its trace.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .integrators import DEFAULT_CONFIG, GL6, ConvergenceError, irk_integrate
from .parallel import worker_count

PERIOD = 2 * math.pi
DEFAULT_LEVELS = (1.9999, -1.9999)


@dataclass(frozen=True)
class MathieuParams:
    delta: float
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.epsilon)):
            raise ValueError("delta and epsilon must be finite")

    def char_time(self):
        """Shorter of the forcing period and the natural period estimate."""
        rate = abs(self.delta) + abs(self.epsilon)
        return PERIOD if rate <= 1.0 else PERIOD / math.sqrt(rate)


def mathieu_rhs(p):
    """``f(t, phi)`` for the first-order system, acting on vectors or matrices."""

    def rhs(t, phi):
        return np.array([phi[1], -(p.delta + p.epsilon * math.cos(t)) * phi[0]])

    return rhs


def mathieu_monodromy(p, cfg=DEFAULT_CONFIG, tab=GL6, steps=None, backend=None):
    """``Phi(2 pi)`` started from the identity.

    Raises
    ------
    ConvergenceError
        If the stage iteration fails on some step.
    """
    if steps is None:
        steps = cfg.steps_for(PERIOD, p.char_time())
    if tab.stages > 3:
        return irk_integrate(mathieu_rhs(p), np.eye(2), 0.0, PERIOD, tab, cfg, steps=steps)
    phi = np.eye(2)
    impl = kernels.backend_module(backend)
    status, residual = impl.mathieu_integrate(
        phi, float(p.delta), float(p.epsilon), 0.0, PERIOD / steps, int(steps),
        tab.a, tab.b, tab.c, int(cfg.max_iter), float(cfg.tol),
    )
    if status:
        raise ConvergenceError(
            f"stage iteration did not converge for delta={p.delta}, eps={p.epsilon} "
            f"(residual {residual:.3e})",
            residual=residual,
        )
    return phi


@dataclass(frozen=True)
class StabilityVerdict:
    kind: str
    trace: float
    max_multiplier_modulus: float
    defect: float = 0.0
    linear_growth: bool = False

    @property
    def stable(self):
        return self.kind == "stable"


def classify(m, tol=1e-6, defect_tol=1e-6):
    """Classify a 2x2 unit-determinant monodromy by its trace.

    At ``|tr| = 2`` (within ``tol``) the verdict is 'marginal' and
    ``defect = ||M - sign(tr) I||``; a defect above ``defect_tol`` means a
    single eigenvector and ``linear_growth`` is set.

    Raises
    ------
    ValueError
        If the matrix is not 2x2 or its determinant is off by more than 1e-4.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    det = float(np.linalg.det(m))
    if abs(det - 1.0) > 1e-4:
        raise ValueError(f"determinant {det:.6g} is not 1; not a conservative monodromy")
    tr = float(np.trace(m))
    modulus = float(np.max(np.abs(np.linalg.eigvals(m))))
    if abs(tr) < 2 - tol:
        return StabilityVerdict("stable", tr, modulus)
    if abs(tr) > 2 + tol:
        return StabilityVerdict("unstable", tr, modulus)
    defect = float(np.linalg.norm(m - math.copysign(1.0, tr) * np.eye(2)))
    return StabilityVerdict("marginal", tr, modulus, defect, defect > defect_tol)


@dataclass
class TraceGrid:
    deltas: np.ndarray
    epsilons: np.ndarray
    values: np.ndarray
    failures: int = 0

    def rows(self):
        """``(delta, epsilon, trace)`` triples in row-major order."""
        for i, d in enumerate(self.deltas):
            for j, e in enumerate(self.epsilons):
                yield float(d), float(e), float(self.values[i, j])


def _row_block(deltas, epsilons, cfg, tab, impl):
    dd, ee = np.meshgrid(deltas, epsilons, indexing="ij")
    dd = np.ascontiguousarray(dd.ravel())
    ee = np.ascontiguousarray(ee.ravel())
    nsteps = np.array(
        [cfg.steps_for(PERIOD, MathieuParams(d, e).char_time()) for d, e in zip(dd, ee)],
        dtype=np.int_,
    )
    out = np.empty(dd.size)
    failed = impl.mathieu_traces(dd, ee, nsteps, PERIOD, tab.a, tab.b, tab.c,
                                 int(cfg.max_iter), float(cfg.tol), out)
    return out.reshape(len(deltas), len(epsilons)), failed


def trace_grid(delta_range, eps_range, nd, ne, cfg=DEFAULT_CONFIG, tab=GL6, jobs=None, backend=None):
    """``tr M`` on an ``nd x ne`` grid; rows (fixed delta) run in parallel.

    Cells whose integration fails hold NaN; their count is in ``failures``
    and reported by a warning.
    """
    if nd < 2 or ne < 2:
        raise ValueError("grid needs at least 2 points per axis")
    deltas = np.linspace(*delta_range, nd)
    epsilons = np.linspace(*eps_range, ne)
    impl = kernels.backend_module(backend)
    workers = worker_count(jobs if jobs is not None else nd)
    blocks = np.array_split(np.arange(nd), max(1, min(workers * 4, nd)))
    work = lambda idx: _row_block(deltas[idx], epsilons, cfg, tab, impl)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(idx) for idx in blocks]
    values = np.vstack([p[0] for p in parts])
    failures = sum(p[1] for p in parts)
    if failures:
        warnings.warn(f"{failures} grid cells failed to integrate and hold NaN", RuntimeWarning)
    return TraceGrid(deltas, epsilons, values, failures)


def _cell_segments(v, level):
    # marching squares over the value grid; each segment joins two edge
    # keys. ('d', i, j) is the edge from (i, j) to (i+1, j) and ('e', i, j)
    # the edge from (i, j) to (i, j+1).
    above = v > level
    nd, ne = v.shape
    segs = []
    for i in range(nd - 1):
        for j in range(ne - 1):
            corners = v[i, j], v[i + 1, j], v[i + 1, j + 1], v[i, j + 1]
            if not all(math.isfinite(c) for c in corners):
                continue
            a00, a10, a11, a01 = above[i, j], above[i + 1, j], above[i + 1, j + 1], above[i, j + 1]
            bottom, right = ("d", i, j), ("e", i + 1, j)
            top, left = ("d", i, j + 1), ("e", i, j)
            crossed = [e for e, hit in ((bottom, a00 != a10), (right, a10 != a11),
                                        (top, a11 != a01), (left, a01 != a00)) if hit]
            if len(crossed) == 2:
                segs.append(tuple(crossed))
            elif len(crossed) == 4:
                center = sum(corners) / 4 > level
                if center == a00:
                    segs.extend([(bottom, right), (top, left)])
                else:
                    segs.extend([(left, bottom), (right, top)])
    return segs


def _edge_point(key, v, level, deltas, epsilons):
    kind, i, j = key
    if kind == "d":
        a, b = v[i, j], v[i + 1, j]
        f = (level - a) / (b - a)
        return (deltas[i] + f * (deltas[i + 1] - deltas[i]), epsilons[j])
    a, b = v[i, j], v[i, j + 1]
    f = (level - a) / (b - a)
    return (deltas[i], epsilons[j] + f * (epsilons[j + 1] - epsilons[j]))


def transition_contours(grid, level=DEFAULT_LEVELS[0]):
    """Polylines of ``tr M = level`` as arrays of ``(delta, epsilon)`` rows.

    Closed curves repeat their first point at the end. NaN cells are
    skipped.
    """
    v = np.asarray(grid.values, dtype=float)
    segs = _cell_segments(v, level)
    nbrs = {}
    for a, b in segs:
        nbrs.setdefault(a, []).append(b)
        nbrs.setdefault(b, []).append(a)
    seen = set()
    lines = []

    def walk(start):
        path = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in nbrs[cur] if n != prev and n not in seen]
            if not nxt:
                if len(path) > 2 and start in nbrs[cur] and prev is not None:
                    path.append(start)
                return path
            prev, cur = cur, nxt[0]
            seen.add(cur)
            path.append(cur)

    # open curves first, from their ends, then closed loops
    ends = sorted(k for k, n in nbrs.items() if len(n) == 1)
    for key in ends + sorted(nbrs):
        if key not in seen:
            lines.append(walk(key))
    return [
        np.array([_edge_point(k, v, level, grid.deltas, grid.epsilons) for k in line])
        for line in lines
    ]


def axis_crossings(grid, levels=DEFAULT_LEVELS):
    """Delta values where contours meet the lowest epsilon row of the grid."""
    out = []
    for level in levels:
        for line in transition_contours(grid, level):
            for end in (line[0], line[-1]):
                if abs(end[1] - grid.epsilons[0]) <= 1e-12:
                    out.append(float(end[0]))
    return sorted(set(out))


def count_tongues(grid, levels=DEFAULT_LEVELS, cells=2):
    """Number of instability tongues opening on the lowest epsilon row.

    A tongue is a pair of transition curves meeting the axis together:
    crossings closer than ``cells`` grid steps are clustered and clusters
    with at least two curve ends are counted.
    """
    xs = axis_crossings(grid, levels)
    if not xs:
        return 0
    gap = cells * (grid.deltas[1] - grid.deltas[0])
    clusters = [[xs[0]]]
    for x in xs[1:]:
        if x - clusters[-1][-1] <= gap:
            clusters[-1].append(x)
        else:
            clusters.append([x])
    return sum(1 for c in clusters if len(c) >= 2)
