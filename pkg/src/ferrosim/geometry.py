"""Minimal connections, canonical harmonic maps and the renormalised energy.

Points are half-charge defects of Q, i.e. points where the angle ``theta`` of
``q = sqrt2 (q11, q12)`` winds once.  A boundary datum of degree ``k`` for M
gives a ``q``-datum of degree ``2k`` and therefore ``2k`` such points.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.linalg import solveh_banded
from scipy.sparse.linalg import splu

from .fields import FieldFormatError, Grid, polar_angle
from .potential import ModelParams, c_beta, lambda_star

TWO_PI = 2.0 * math.pi
MAX_POINTS = 16


def _wrap(a):
    return (a + math.pi) % TWO_PI - math.pi


# ------------------------------------------------------------- connections


@dataclass
class Connection:
    points: np.ndarray
    pairing: list
    total_length: float

    def segments(self):
        return [(self.points[i], self.points[j]) for i, j in self.pairing]

    def to_json(self) -> dict:
        return {"pairs": [list(map(int, p)) for p in self.pairing], "length": float(self.total_length)}


def _check_points(points, max_points=MAX_POINTS):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an array of shape (N, 2)")
    N = len(pts)
    if N < 2 or N % 2:
        raise ValueError(f"need an even number >= 2 of points, got {N}")
    if N > max_points:
        raise ValueError(f"capacity exceeded: {N} points, exhaustive matching supports at most {max_points}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    if np.any(d[np.triu_indices(N, 1)] == 0):
        raise ValueError("points must be distinct")
    return pts


def minimal_connection(points) -> Connection:
    """Pairing of ``points`` with minimal total segment length.

    Exhaustive over all ``(N-1)!!`` pairings, organised as a memoised
    recursion over subsets (the lowest free index is paired with each other
    free index in increasing order).  Among pairings of equal length up to
    rounding the lexicographically smallest one is returned.
    """
    pts = _check_points(points)
    N = len(pts)
    D = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    tol = 1e-12 * max(1.0, float(D.max())) * N

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == 0:
            return 0.0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        found = None
        for j in range(i + 1, N):
            if rest >> j & 1:
                sub, pairs = best(rest & ~(1 << j))
                val = D[i, j] + sub
                if found is None or val < found[0] - tol:
                    found = (val, ((i, j),) + pairs)
        return found

    length, pairing = best((1 << N) - 1)
    return Connection(pts, [tuple(p) for p in pairing], float(sum(D[i, j] for i, j in pairing)))


def orientation(a, b, c) -> int:
    """Sign of the signed area of the triangle ``abc``."""
    v = float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return (v > 0) - (v < 0)


def _on_segment(a, b, p):
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed segments ``[p1, p2]`` and ``[q1, q2]`` share a point."""
    o1, o2 = orientation(p1, p2, q1), orientation(p1, p2, q2)
    o3, o4 = orientation(q1, q2, p1), orientation(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and _on_segment(p1, p2, q1)) or (o2 == 0 and _on_segment(p1, p2, q2))
            or (o3 == 0 and _on_segment(q1, q2, p1)) or (o4 == 0 and _on_segment(q1, q2, p2)))


def connection_is_disjoint(conn: Connection) -> bool:
    segs = conn.segments()
    return not any(segments_intersect(*segs[a], *segs[b])
                   for a, b in itertools.combinations(range(len(segs)), 2))


def distance_to_segments(X, Y, segments):
    """Pointwise distance from ``(X, Y)`` to the union of ``segments``."""
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    out = np.full(np.broadcast(X, Y).shape, np.inf)
    for a, b in segments:
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        ab = b - a
        L2 = float(ab @ ab)
        t = np.zeros_like(out) if L2 == 0 else np.clip(((X - a[0]) * ab[0] + (Y - a[1]) * ab[1]) / L2, 0, 1)
        out = np.minimum(out, np.hypot(X - a[0] - t * ab[0], Y - a[1] - t * ab[1]))
    return out


# ----------------------------------------------------- canonical harmonic map


@lru_cache(maxsize=8)
def _dirichlet_solver(n: int):
    """Factorised five-point Laplacian (times ``-h**2``) on the interior nodes."""
    m = n - 1
    T = sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])
    I = sp.identity(m)
    return splu((sp.kron(I, T) + sp.kron(T, I)).tocsc())


def solve_dirichlet(boundary, source=None):
    """Solve ``Delta_h u = source`` with ``u = boundary`` on the boundary nodes.

    ``boundary`` is a full node array whose interior is ignored; ``source``
    (interior-shaped, optional) is the prescribed five-point Laplacian.
    """
    n = boundary.shape[0] - 1
    h = 1.0 / n
    rhs = np.zeros((n - 1, n - 1))
    rhs[0, :] += boundary[0, 1:-1]
    rhs[-1, :] += boundary[-1, 1:-1]
    rhs[:, 0] += boundary[1:-1, 0]
    rhs[:, -1] += boundary[1:-1, -1]
    if source is not None:
        rhs -= h * h * source
    u = boundary.astype(float).copy()
    u[1:-1, 1:-1] = _dirichlet_solver(n).solve(rhs.ravel()).reshape(n - 1, n - 1)
    return u


def wrapped_laplacian(theta, h):
    """Five-point Laplacian of an angle field (differences taken modulo 2 pi)."""
    c = theta[1:-1, 1:-1]
    return (_wrap(theta[2:, 1:-1] - c) + _wrap(theta[:-2, 1:-1] - c)
            + _wrap(theta[1:-1, 2:] - c) + _wrap(theta[1:-1, :-2] - c)) / (h * h)


def singular_angle(X, Y, points):
    return sum(np.arctan2(Y - p[1], X - p[0]) for p in points)


def boundary_q_angle(X, Y, k):
    """Angle of ``q`` for the degree-``k`` boundary datum (degree ``2k``)."""
    return 2 * k * polar_angle(X, Y)


def _unwrapped_trace(vals):
    """Continuous trace of an angle sampled around a closed loop; raises if it winds."""
    u = np.unwrap(np.append(vals, vals[0]))
    if abs(u[-1] - u[0]) > math.pi:
        raise ValueError(
            f"inconsistent inputs: boundary angle minus singular part winds "
            f"{round((u[-1] - u[0]) / TWO_PI)} times (number of points must equal 2k)")
    return u[:-1]


@dataclass
class AngleField:
    """Angle ``theta`` of ``q`` for the canonical harmonic map with given singularities.

    ``theta = singular + harmonic + correction``: ``singular`` is the sum of
    polar angles about the points, ``harmonic`` is discrete-harmonic with the
    remaining boundary data, and ``correction`` (zero on the boundary) cancels
    the lattice Laplacian of ``singular`` at nodes at least ``2h`` from every
    point, so that ``theta`` itself is discrete-harmonic there.
    """

    grid: Grid
    points: np.ndarray
    k: int
    singular: np.ndarray
    harmonic: np.ndarray
    correction: np.ndarray

    @property
    def theta(self):
        return self.singular + self.harmonic + self.correction

    @property
    def q(self):
        t = self.theta
        return np.cos(t), np.sin(t)

    def laplacian_residual(self, min_dist: float | None = None) -> float:
        """Max wrapped Laplacian of ``theta`` over interior nodes at distance >= ``min_dist``."""
        g = self.grid
        if min_dist is None:
            min_dist = 4 * g.h
        lap = wrapped_laplacian(self.theta, g.h)
        X, Y = g.coords
        far = _min_dist(X, Y, self.points)[1:-1, 1:-1] >= min_dist - 1e-12
        return float(np.max(np.abs(lap[far]))) if far.any() else 0.0


def _min_dist(X, Y, points):
    return np.min(np.stack([np.hypot(X - p[0], Y - p[1]) for p in points]), axis=0)


def canonical_angle(points, k: int, grid: Grid) -> AngleField:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if k < 1:
        raise ValueError("boundary degree k must be >= 1")
    if len(pts) != 2 * k:
        raise ValueError(f"inconsistent inputs: {len(pts)} points for boundary degree {k} (need {2 * k})")
    if np.any(pts <= 0) or np.any(pts >= 1):
        raise ValueError("points must lie in the open unit square")
    X, Y = grid.coords
    S = singular_angle(X, Y, pts)
    iy, ix = grid.boundary_loop()
    trace = _unwrapped_trace(boundary_q_angle(X[iy, ix], Y[iy, ix], k) - S[iy, ix])
    bnd = np.zeros(grid.shape)
    bnd[iy, ix] = trace
    harm = solve_dirichlet(bnd)

    h = grid.h
    far = _min_dist(X, Y, pts)[1:-1, 1:-1] >= 2 * h - 1e-12
    src = np.where(far, -wrapped_laplacian(S, h), 0.0)
    corr = solve_dirichlet(np.zeros(grid.shape), src)
    return AngleField(grid, pts, k, S, harm, corr)


# ----------------------------------------------------- renormalised energy


def _check_sigmas(points, sigmas, h):
    sig = np.asarray(sorted(sigmas), dtype=float)
    if len(sig) < 2 or len(set(sig)) != len(sig):
        raise ValueError("need at least two distinct sigmas")
    if sig[0] < 4 * h - 1e-12:
        raise ValueError(f"sigmas must be >= 4h = {4 * h:g}")
    smax = sig[-1]
    if np.any(points - smax <= 0) or np.any(points + smax >= 1):
        raise ValueError(f"sigma balls of radius {smax:g} touch the boundary")
    for a, b in itertools.combinations(points, 2):
        if np.hypot(*(a - b)) <= 2 * smax:
            raise ValueError(f"sigma balls of radius {smax:g} overlap")
    return sig


def _cell_samples(s, gauss):
    if gauss:
        x, w = np.polynomial.legendre.leggauss(s)
        x, w = 0.5 * (x + 1), 0.5 * w
    else:
        x, w = (np.arange(s) + 0.5) / s, np.full(s, 1.0 / s)
    U, V = np.meshgrid(x, x, indexing="xy")
    return U.ravel(), V.ravel(), np.outer(w, w).ravel()


def _dirichlet_outside_balls(points, phi, grid, sigma):
    """``1/2 int |grad S + grad phi|^2`` over the square minus the sigma-balls.

    ``grad S`` is exact, ``grad phi`` that of the bilinear interpolant.
    Cells far from the balls use 2x2 Gauss points, nearer cells 4x4; cells cut
    by a circle use 32x32 midpoints with the ball indicator.
    """
    n, h = grid.n, grid.h
    cx = (np.arange(n) + 0.5) * h
    CX, CY = np.meshgrid(cx, cx, indexing="xy")
    dc = _min_dist(CX, CY, points)
    half_diag = h / math.sqrt(2)
    inside = dc + half_diag < sigma
    cut = (~inside) & (dc - half_diag <= sigma)
    near = (~inside) & (~cut) & (dc < sigma + 8 * h)
    far = ~(inside | cut | near)
    total = 0.0
    for mask, s, gauss, use_ind in ((far, 2, True, False), (near, 4, True, False), (cut, 32, False, True)):
        iy, ix = np.nonzero(mask)
        if len(iy) == 0:
            continue
        U, V, W = _cell_samples(s, gauss)
        x = (ix[:, None] + U[None]) * h
        y = (iy[:, None] + V[None]) * h
        p00, p10 = phi[iy, ix][:, None], phi[iy, ix + 1][:, None]
        p01, p11 = phi[iy + 1, ix][:, None], phi[iy + 1, ix + 1][:, None]
        gx = ((1 - V) * (p10 - p00) + V * (p11 - p01)) / h
        gy = ((1 - U) * (p01 - p00) + U * (p11 - p10)) / h
        for a in points:
            dx, dy = x - a[0], y - a[1]
            r2 = dx * dx + dy * dy
            gx = gx - dy / r2
            gy = gy + dx / r2
        dens = gx * gx + gy * gy
        if use_ind:
            dens = np.where(_min_dist(x, y, points) >= sigma, dens, 0.0)
        total += 0.5 * float(np.sum(dens * W[None])) * h * h
    return total


@dataclass
class RenormResult:
    W: float
    slope: float
    table: list            # rows (sigma, raw energy outside balls, W(sigma))
    fit_residual: float

    def to_json(self) -> dict:
        return {"W": self.W, "slope": self.slope, "fit_residual": self.fit_residual,
                "table": [{"sigma": s, "energy": e, "W_sigma": w} for s, e, w in self.table]}


def renormalized_energy(points, k: int, grid: Grid, sigmas=None) -> RenormResult:
    """``lim (1/2 int_{outside balls} |grad theta|^2 - 2 pi k |log sigma|)`` by a sigma ladder.

    Each rung is evaluated at radius sigma and the limit is taken as the
    intercept of the least-squares line ``A + B sigma``.  ``fit_residual`` is
    the largest deviation of a rung from that line.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    h = grid.h
    if sigmas is None:
        sigmas = (4 * h, 8 * h, 16 * h)
    sig = _check_sigmas(pts, sigmas, h)
    af = canonical_angle(pts, k, grid)
    table = []
    for s in sig:
        e = _dirichlet_outside_balls(pts, af.harmonic, grid, s)
        table.append((float(s), e, e - TWO_PI * k * abs(math.log(s))))
    Ws = np.array([t[2] for t in table])
    B, A = np.polyfit(sig, Ws, 1)
    resid = float(np.max(np.abs(Ws - (A + B * sig))))
    return RenormResult(float(A), float(B), table, resid)


# boundary-integral evaluation ------------------------------------------------


@lru_cache(maxsize=4)
def _boundary_quadrature(panels: int = 64, order: int = 8):
    """Gauss-Legendre nodes on the square's boundary, counter-clockwise from (0, 0)."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = (np.arange(panels)[:, None] + 0.5 * (x[None] + 1)).ravel() / panels
    wt = np.tile(w / (2 * panels), panels)
    one, zero = np.ones_like(edges), np.zeros_like(edges)
    P = np.concatenate([np.column_stack([edges, zero]), np.column_stack([one, edges]),
                        np.column_stack([1 - edges, one]), np.column_stack([zero, 1 - edges])])
    Nrm = np.concatenate([np.tile([0.0, -1.0], (len(edges), 1)), np.tile([1.0, 0.0], (len(edges), 1)),
                          np.tile([0.0, 1.0], (len(edges), 1)), np.tile([-1.0, 0.0], (len(edges), 1))])
    return P, Nrm, np.tile(wt, 4)


def _harmonic_energy(trace_fn, n):
    g = Grid(n)
    X, Y = g.coords
    iy, ix = g.boundary_loop()
    bnd = np.zeros(g.shape)
    bnd[iy, ix] = trace_fn(X[iy, ix], Y[iy, ix])
    u = solve_dirichlet(bnd)
    # edges lying on the boundary carry half weight (trapezoidal rule)
    dy2, dx2 = np.diff(u, axis=0) ** 2, np.diff(u, axis=1) ** 2
    dy2[:, [0, -1]] *= 0.5
    dx2[[0, -1], :] *= 0.5
    return 0.5 * (dy2.sum() + dx2.sum())


def renormalized_energy_boundary(points, k: int, n_interior: int = 128) -> float:
    """Renormalised energy from boundary integrals and one harmonic extension.

    With ``S`` the sum of polar angles about the points, ``r_j`` the distance
    to point ``j`` and ``phi`` the harmonic function with boundary values
    ``theta_b - S``,

    ``W = sum_j C(a_j) + sum_{i<j} [int log r_i d_nu log r_j - 2 pi log|a_i - a_j|]
    + int phi d_nu S + 1/2 int |grad phi|^2``

    where ``C(a) = 1/2 int log r d_nu log r``.  The boundary integrals use
    panel Gauss-Legendre rules; the Dirichlet energy of ``phi`` is the
    Richardson-extrapolated five-point energy on grids ``n`` and ``n/2``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) != 2 * k:
        raise ValueError(f"inconsistent inputs: {len(pts)} points for boundary degree {k}")
    if np.any(pts <= 0) or np.any(pts >= 1):
        raise ValueError("points must lie in the open unit square")
    P, Nrm, wq = _boundary_quadrature()
    logs, dlogs, dS = [], [], np.zeros(len(P))
    for a in pts:
        d = P - a
        r2 = np.sum(d * d, axis=1)
        logs.append(0.5 * np.log(r2))
        dlogs.append(np.sum(d * Nrm, axis=1) / r2)
        dS += (-d[:, 1] * Nrm[:, 0] + d[:, 0] * Nrm[:, 1]) / r2
    W = 0.0
    for j in range(len(pts)):
        W += 0.5 * np.sum(wq * logs[j] * dlogs[j])
    for i, j in itertools.combinations(range(len(pts)), 2):
        W += np.sum(wq * logs[i] * dlogs[j]) - TWO_PI * math.log(np.hypot(*(pts[i] - pts[j])))

    def trace(x, y):
        return _unwrapped_trace(boundary_q_angle(x, y, k) - singular_angle(x, y, pts))

    W += np.sum(wq * trace(P[:, 0], P[:, 1]) * dS)
    e1, e2 = _harmonic_energy(trace, n_interior), _harmonic_energy(trace, n_interior // 2)
    W += (4 * e1 - e2) / 3
    return float(W)


def w_beta(points, k: int, params: ModelParams, grid: Grid | None = None,
           method: str = "boundary") -> float:
    """``W + c_beta * L`` with ``L`` the length of a minimal connection of the points.

    ``method`` selects the evaluation of ``W``: ``"boundary"`` (boundary
    integrals) or ``"ladder"`` (sigma ladder on ``grid``).
    """
    if method == "boundary":
        W = renormalized_energy_boundary(points, k)
    elif method == "ladder":
        if grid is None:
            raise ValueError("the ladder method needs a grid")
        W = renormalized_energy(points, k, grid).W
    else:
        raise ValueError(f"unknown method {method!r}")
    return W + c_beta(params.beta) * minimal_connection(points).total_length


@dataclass
class Minimum:
    points: np.ndarray
    value: float


@dataclass
class MinimizeResult:
    points: np.ndarray
    value: float
    start_values: list
    minima: list = field(default_factory=list)   # distinct local minima, best first


def _same_configuration(a, b, tol):
    # compare as unordered point sets
    return any(np.max(np.linalg.norm(a[list(perm)] - b, axis=1)) < tol
               for perm in itertools.permutations(range(len(a))))


def minimize_w_beta(k: int, params: ModelParams, grid: Grid, starts) -> MinimizeResult:
    """Nelder-Mead descent of ``w_beta`` from each start; the best result wins.

    Configurations closer than ``4h`` to the boundary or with two points
    closer than ``4h`` are penalised quadratically.  Starts violating these
    constraints are skipped.
    """
    h = grid.h
    margin = sep = 4 * h
    N = 2 * k
    if N > 8:
        raise ValueError("minimisation is limited to k <= 4")

    def violation(p):
        v = np.sum(np.maximum(0, margin - p) ** 2) + np.sum(np.maximum(0, p - (1 - margin)) ** 2)
        for a, b in itertools.combinations(p, 2):
            v += max(0.0, sep - float(np.hypot(*(a - b)))) ** 2
        return v

    def objective(x):
        p = x.reshape(N, 2)
        v = violation(p)
        q = np.clip(p, margin, 1 - margin)
        if min(np.hypot(*(a - b)) for a, b in itertools.combinations(q, 2)) < 1e-9:
            return math.inf
        return w_beta(q, k, params) + 1e4 * v

    results, start_values = [], []
    for s in starts:
        x0 = np.asarray(s, dtype=float).reshape(-1)
        if x0.size != 2 * N:
            raise ValueError(f"each start needs {N} points")
        if violation(x0.reshape(N, 2)) > 0:
            continue
        f0 = objective(x0)
        start_values.append(f0)
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 4000, "maxfev": 8000})
        x, f = (res.x, res.fun) if res.fun <= f0 else (x0, f0)
        results.append(Minimum(x.reshape(N, 2), float(f)))
    if not results:
        raise ValueError("no start satisfies the boundary margin and separation constraints")
    results.sort(key=lambda m: m.value)
    distinct = []
    for m in results:
        if not any(_same_configuration(m.points, d.points, 2 * h) for d in distinct):
            distinct.append(m)
    return MinimizeResult(results[0].points, results[0].value, start_values, distinct)


# ------------------------------------------------------------- SBV lifting


def _side(a, b, p) -> int:
    # nodes exactly on the segment's line count as the positive side
    o = orientation(a, b, p)
    return 1 if o >= 0 else -1


def _edge_crosses(p, q, a, b) -> bool:
    """Edge ``pq`` crosses segment ``ab`` (the segment nudged off collinear nodes)."""
    if _side(a, b, p) == _side(a, b, q):
        return False
    return orientation(p, q, a) * orientation(p, q, b) <= 0


def sbv_lifting(angle: AngleField, connection: Connection, params: ModelParams):
    """Unit vector field along the director of ``angle`` whose sign jumps on the connection.

    The director ``(cos theta/2, sin theta/2)`` is made continuous by a
    breadth-first flood fill that transports the sign along every grid edge
    not crossing a connection segment.  The global sign is fixed so that the
    boundary trace points along the boundary magnetisation.  Returns
    ``(n1, n2)``; the lifted magnetisation is ``lambda* (n1, n2)``.
    """
    g = angle.grid
    n = g.n
    X, Y = g.coords
    half = 0.5 * angle.theta
    d1, d2 = np.cos(half), np.sin(half)
    segs = connection.segments()
    bbox = [(min(a[0], b[0]) - g.h, max(a[0], b[0]) + g.h, min(a[1], b[1]) - g.h, max(a[1], b[1]) + g.h)
            for a, b in segs]

    def blocked(i0, j0, i1, j1):
        p, q = (X[i0, j0], Y[i0, j0]), (X[i1, j1], Y[i1, j1])
        for (a, b), (x0, x1, y0, y1) in zip(segs, bbox):
            if x0 <= p[0] <= x1 and y0 <= p[1] <= y1 and _edge_crosses(p, q, a, b):
                return True
        return False

    # a node sitting on a defect has an arbitrary director; it takes a sign
    # from its neighbours but passes none on
    sink = _min_dist(X, Y, connection.points) < 0.5 * g.h
    tau = np.zeros(g.shape, dtype=int)
    tau[0, 0] = 1
    queue = [(0, 0)]
    head = 0
    while head < len(queue):
        i, j = queue[head]
        head += 1
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if not (0 <= a <= n and 0 <= b <= n) or tau[a, b] != 0:
                continue
            if blocked(i, j, a, b):
                continue
            s = 1 if d1[i, j] * d1[a, b] + d2[i, j] * d2[a, b] >= 0 else -1
            tau[a, b] = tau[i, j] * s
            if not sink[a, b]:
                queue.append((a, b))
    if np.any(tau == 0):
        raise ValueError("connection separates the domain; flood fill left nodes unreached")
    n1, n2 = tau * d1, tau * d2
    iy, ix = g.boundary_loop()
    mb = angle.k * polar_angle(X[iy, ix], Y[iy, ix])
    agree = np.cos(mb) * n1[iy, ix] + np.sin(mb) * n2[iy, ix]
    if np.sum(agree) < 0:
        n1, n2, agree = -n1, -n2, -agree
    if np.any(agree <= 0):
        raise ValueError("lifting does not match the boundary magnetisation with a single sign")
    return n1, n2


def lifted_magnetisation(angle: AngleField, connection: Connection, params: ModelParams):
    n1, n2 = sbv_lifting(angle, connection, params)
    lam = lambda_star(params.beta)
    return lam * n1, lam * n2


# ------------------------------------------------------------ core energy


@dataclass
class CoreEnergyResult:
    eps: np.ndarray
    gamma: np.ndarray
    gamma_star: float

    @property
    def offset(self):
        """``gamma(eps) - pi |log eps|``."""
        return self.gamma - math.pi * np.abs(np.log(self.eps))

    def to_json(self) -> dict:
        return {"gamma_star": self.gamma_star,
                "table": [{"eps": float(e), "gamma": float(g), "offset": float(o)}
                          for e, g, o in zip(self.eps, self.gamma, self.offset)]}


class NewtonDivergence(RuntimeError):
    def __init__(self, msg, iterate=None, gradient_norm=None):
        super().__init__(msg)
        self.iterate, self.gradient_norm = iterate, gradient_norm


def _radial_energy(f, r, eps):
    """Midpoint discretisation of ``pi int (f'^2 + f^2/r^2 + (1-f^2)^2 / (2 eps^2)) r dr``."""
    dr = np.diff(r)
    rm = 0.5 * (r[1:] + r[:-1])
    fm = 0.5 * (f[1:] + f[:-1])
    df = np.diff(f)
    return math.pi * float(np.sum(df ** 2 / dr * rm + dr * fm ** 2 / rm
                                  + dr * rm * (1 - fm ** 2) ** 2 / (2 * eps ** 2)))


def _radial_grad_hess(f, r, eps):
    dr = np.diff(r)
    rm = 0.5 * (r[1:] + r[:-1])
    fm = 0.5 * (f[1:] + f[:-1])
    df = np.diff(f)
    # per-cell derivatives w.r.t. the midpoint value and the difference
    a = 2 * rm / dr                                   # d2/d(df)^2
    dpot = dr * (2 * fm / rm - 2 * rm * fm * (1 - fm ** 2) / eps ** 2)
    d2pot = dr * (2 / rm + rm * (6 * fm ** 2 - 2) / eps ** 2)
    g_cell_left = -a * df + 0.5 * dpot               # d/d f_left
    g_cell_right = a * df + 0.5 * dpot
    grad = np.zeros_like(f)
    grad[:-1] += g_cell_left
    grad[1:] += g_cell_right
    diag = np.zeros_like(f)
    diag[:-1] += a + 0.25 * d2pot
    diag[1:] += a + 0.25 * d2pot
    off = -a + 0.25 * d2pot
    return math.pi * grad, math.pi * diag, math.pi * off


def _minimise_radial(eps, r, maxit=200, tol=1e-11):
    f = np.tanh(r / eps) / math.tanh(1.0 / eps)
    E = _radial_energy(f, r, eps)
    for _ in range(maxit):
        grad, diag, off = _radial_grad_hess(f, r, eps)
        g = grad[1:-1]
        gnorm = float(np.max(np.abs(g)))
        if gnorm < tol:
            return f, E
        d, o = diag[1:-1], off[1:-1]
        shift = 0.0
        while True:
            ab = np.zeros((2, len(d)))
            ab[0, 1:] = o
            ab[1] = d + shift
            try:
                step = solveh_banded(ab, -g)
                break
            except np.linalg.LinAlgError:
                shift = max(2 * shift, 1e-6 * float(np.max(np.abs(d))))
        t = 1.0
        while t > 1e-10:
            trial = f.copy()
            trial[1:-1] += t * step
            Et = _radial_energy(trial, r, eps)
            if Et <= E + 1e-4 * t * float(g @ step):
                break
            t *= 0.5
        else:
            # no decrease along the Newton direction: the iterate is stationary to rounding
            if gnorm < 1e3 * tol:
                return f, E
            raise NewtonDivergence(f"line search failed for eps={eps}", f, gnorm)
        f, E = trial, Et
    raise NewtonDivergence(f"Newton did not converge in {maxit} iterations for eps={eps}", f, gnorm)


def core_energy(eps_list, n: int = 2000) -> CoreEnergyResult:
    """Radial core energy ``gamma(eps)`` of the unit-disc vortex and its limit offset.

    For each ``eps`` the radial energy is minimised over ``f(0) = 0,
    f(1) = 1`` on ``n`` uniform intervals by damped Newton.
    ``gamma_star`` is the intercept of the least-squares line through
    ``(eps**2, gamma(eps) - pi |log eps|)``.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.ndim != 1 or len(eps) < 2:
        raise ValueError("need at least two eps values")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be strictly decreasing")
    if np.any(eps < 2.0 / n) or np.any(eps <= 0):
        raise ValueError(f"every eps must be >= 2/n = {2.0 / n:g}")
    r = np.linspace(0.0, 1.0, n + 1)
    gam = np.array([_minimise_radial(e, r)[1] for e in eps])
    off = gam - math.pi * np.abs(np.log(eps))
    slope, icpt = np.polyfit(eps ** 2, off, 1)
    return CoreEnergyResult(eps, gam, float(icpt))


# ------------------------------------------------------------------- I/O


def read_points_csv(path) -> np.ndarray:
    """Rows ``x,y``; blank lines and ``#`` comments are skipped."""
    pts = []
    for lineno, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split(",")
        if len(parts) != 2:
            raise FieldFormatError(f"expected 'x,y', found {len(parts)} fields", lineno)
        row = []
        for col, p in enumerate(parts, start=1):
            try:
                row.append(float(p))
            except ValueError:
                raise FieldFormatError(f"not a number: {p.strip()!r}", lineno, col) from None
        pts.append(row)
    if not pts:
        raise FieldFormatError("no points found", 1)
    return np.array(pts)


def write_points_csv(path, points) -> None:
    Path(path).write_text("".join(f"{float(x)!r},{float(y)!r}\n" for x, y in np.asarray(points, dtype=float)))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")
