"""Discrete energies, winding numbers, defects and jump lines of a field state.

Energies use one quadrature throughout: per cell, the squared gradient is the
mean of the squared differences along the cell's four edges, and the
potential is the mean of its four corner values, both weighted by ``h**2``.
With this choice the exact gradient of the discrete energy with respect to an
interior node value is the five-point Laplacian plus the pointwise reaction
term, so the discrete flow in :mod:`ferrosim.flow` is an exact gradient flow
of :func:`discrete_energy`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .fields import FieldState
from .potential import PotentialConstants, f_eps, g_eps, h as h_fn

TWO_PI = 2.0 * math.pi


def wrap(a):
    """Map angles to ``[-pi, pi)``."""
    return (a + math.pi) % TWO_PI - math.pi


def cell_dirichlet(a):
    """Per-cell ``|grad a|**2 h**2`` (dimensionless), shape ``(n, n)``."""
    dx = np.diff(a, axis=1)
    dy = np.diff(a, axis=0)
    return 0.5 * (dx[:-1, :] ** 2 + dx[1:, :] ** 2 + dy[:, :-1] ** 2 + dy[:, 1:] ** 2)


def cell_mean(a):
    return 0.25 * (a[:-1, :-1] + a[:-1, 1:] + a[1:, :-1] + a[1:, 1:])


@dataclass
class EnergyBreakdown:
    elastic_q: float
    elastic_m: float
    potential: float
    total: float
    split_g: float
    split_mm: float
    split_remainder: float

    def as_dict(self):
        return dict(self.__dict__)


def energy_density_cells(state: FieldState, consts: PotentialConstants):
    """Per-cell contributions ``(elastic_q, elastic_m, potential)``, each ``(n, n)``."""
    eps = consts.params.eps
    hh = state.grid.h ** 2
    eq = cell_dirichlet(state.q11) + cell_dirichlet(state.q12)
    em = 0.5 * eps * (cell_dirichlet(state.m1) + cell_dirichlet(state.m2))
    pot = cell_mean(f_eps(state.q11, state.q12, state.m1, state.m2, consts)) * hh / eps ** 2
    return eq, em, pot


def discrete_energy(state: FieldState, consts: PotentialConstants) -> EnergyBreakdown:
    eps, beta = consts.params.eps, consts.params.beta
    hh = state.grid.h ** 2
    eq, em, pot = energy_density_cells(state, consts)
    elastic_q, elastic_m, potential = float(eq.sum()), float(em.sum()), float(pot.sum())
    total = elastic_q + elastic_m + potential

    # split form on cells whose four corners have |Q| >= 1/2
    qn = state.q_norm
    ok = qn >= 0.5
    cell_ok = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, :-1] & ok[1:, 1:]
    g_cells = eq + cell_mean(g_eps(qn, consts)) * hh
    corners = _cell_frame_components(state)
    u_grad = sum(_local_dirichlet(c) for c in corners)
    h_corner = [h_fn(u1, u2, beta) for u1, u2 in zip(*corners)]
    mm_cells = 0.5 * eps * u_grad + 0.25 * sum(h_corner) * hh / eps
    split_g = float(g_cells[cell_ok].sum())
    split_mm = float(mm_cells[cell_ok].sum())
    return EnergyBreakdown(elastic_q, elastic_m, potential, total,
                           split_g, split_mm, total - split_g - split_mm)


def director_angle(state: FieldState):
    """Angle of the eigenvector of Q with positive eigenvalue, defined modulo pi."""
    return 0.5 * np.arctan2(state.q12, state.q11)


def frame_decompose(state: FieldState):
    """Components ``(u1, u2)`` of M in the eigenframe ``(n, m)`` of Q.

    ``m`` is ``n`` rotated by +pi/2.  The sign of the frame is arbitrary per
    node, so only sign-invariant combinations of ``u`` are meaningful.
    Returns ``(u1, u2, defined)`` where ``defined`` marks ``|Q| >= 1/2``.
    """
    psi = director_angle(state)
    c, s = np.cos(psi), np.sin(psi)
    u1 = state.m1 * c + state.m2 * s
    u2 = -state.m1 * s + state.m2 * c
    return u1, u2, state.q_norm >= 0.5


def _cell_frame_components(state: FieldState):
    """Corner values of (u1, u2) per cell with the frame aligned to the first corner."""
    psi = director_angle(state)
    sl = [(slice(None, -1), slice(None, -1)), (slice(None, -1), slice(1, None)),
          (slice(1, None), slice(1, None)), (slice(1, None), slice(None, -1))]
    ref = psi[sl[0]]
    u1s, u2s = [], []
    for s in sl:
        p = psi[s]
        flip = np.cos(p - ref) < 0
        p = np.where(flip, p + math.pi, p)
        c, sn = np.cos(p), np.sin(p)
        m1, m2 = state.m1[s], state.m2[s]
        u1s.append(m1 * c + m2 * sn)
        u2s.append(-m1 * sn + m2 * c)
    return u1s, u2s


def _local_dirichlet(corner_vals):
    a0, a1, a2, a3 = corner_vals
    return 0.5 * ((a1 - a0) ** 2 + (a2 - a3) ** 2 + (a3 - a0) ** 2 + (a2 - a1) ** 2)


# ------------------------------------------------------------------ winding


def q_angle(state: FieldState):
    return np.arctan2(state.q12, state.q11)


def winding_field(state: FieldState, zero_tol: float = 1e-12):
    """Winding number of ``q = sqrt2 (q11, q12)`` around each plaquette.

    Returns ``(winding, indeterminate)``; ``winding`` is an integer ``(n, n)``
    array (zero where indeterminate) and ``indeterminate`` flags plaquettes
    with a corner where ``|q| <= zero_tol``.
    """
    phi = q_angle(state)
    # one wrapped difference per edge, used with opposite signs by the two
    # plaquettes sharing it, so windings telescope even at differences of pi
    dx = wrap(np.diff(phi, axis=1))
    dy = wrap(np.diff(phi, axis=0))
    circ = dx[:-1, :] + dy[:, 1:] - dx[1:, :] - dy[:, :-1]
    w = np.rint(circ / TWO_PI).astype(int)
    qn = state.q_norm
    zero = qn <= zero_tol
    indet = zero[:-1, :-1] | zero[:-1, 1:] | zero[1:, :-1] | zero[1:, 1:]
    w[indet] = 0
    return w, indet


def loop_winding(angles) -> int:
    """Winding of a closed loop of angles (first point not repeated)."""
    a = np.asarray(angles)
    d = wrap(np.diff(np.append(a, a[0])))
    return int(np.rint(d.sum() / TWO_PI))


def boundary_winding(state: FieldState, which: str = "q") -> int:
    iy, ix = state.grid.boundary_loop()
    if which == "q":
        ang = q_angle(state)[iy, ix]
    else:
        ang = np.arctan2(state.m2, state.m1)[iy, ix]
    return loop_winding(ang)


def jacobian_integral(state: FieldState) -> float:
    """``int det grad q`` for the bilinear interpolant of ``q``.

    For a bilinear map each cell integral is the signed area of the image
    quadrilateral, computed here with the shoelace formula.
    """
    a = np.sqrt(2.0) * state.q11
    b = np.sqrt(2.0) * state.q12
    sl = [(slice(None, -1), slice(None, -1)), (slice(None, -1), slice(1, None)),
          (slice(1, None), slice(1, None)), (slice(1, None), slice(None, -1))]
    xs = [a[s] for s in sl]
    ys = [b[s] for s in sl]
    area = np.zeros_like(xs[0])
    for i in range(4):
        j = (i + 1) % 4
        area += xs[i] * ys[j] - xs[j] * ys[i]
    return float(0.5 * area.sum())


# ------------------------------------------------------------------ defects


@dataclass
class Defect:
    position: tuple
    q_winding: int
    core_radius: float
    nodes: np.ndarray = field(repr=False, default=None)
    boundary_adjacent: bool = False

    @property
    def q_charge(self) -> float:
        return self.q_winding / 2.0


@dataclass
class DefectSet:
    defects: list

    def __len__(self):
        return len(self.defects)

    def __iter__(self):
        return iter(self.defects)

    @property
    def positions(self):
        return np.array([d.position for d in self.defects]).reshape(-1, 2)

    @property
    def total_winding(self) -> int:
        return sum(d.q_winding for d in self.defects)

    def core_mask(self, shape):
        mask = np.zeros(shape, dtype=bool)
        for d in self.defects:
            mask[d.nodes[:, 0], d.nodes[:, 1]] = True
        return mask


def detect_defects(state: FieldState, consts: PotentialConstants | None = None,
                   threshold: float = 0.5) -> DefectSet:
    """Locate point defects of Q.

    Candidate nodes are those with ``|Q| < threshold (1 + kappa* eps)``
    together with the corners of plaquettes of non-zero q-winding (a core
    narrower than the mesh need not produce a low node value).  Candidates
    are grouped into 8-connected clusters.  Each cluster reports the centroid
    weighted by the depletion ``(1 + kappa* eps) - |Q|``, the q-winding of the
    smallest enclosing rectangle of grid edges whose corners all have
    ``|Q|`` above the threshold, and the largest centroid-to-node distance.
    """
    grid = state.grid
    n, hgrid = grid.n, grid.h
    qref = 1.0 if consts is None else 1.0 + consts.kappa_star * consts.params.eps
    cut = threshold * qref
    qn = state.q_norm
    cand = qn < cut
    w, _ = winding_field(state)
    nz = w != 0
    cand[:-1, :-1] |= nz
    cand[:-1, 1:] |= nz
    cand[1:, :-1] |= nz
    cand[1:, 1:] |= nz
    labels, count = ndimage.label(cand, structure=np.ones((3, 3), dtype=int))
    X, Y = grid.coords
    phi = q_angle(state)
    defects = []
    for lab in range(1, count + 1):
        iy, ix = np.nonzero(labels == lab)
        wts = np.clip(qref - qn[iy, ix], 0.0, None) + 1e-12
        cx = float(np.sum(wts * X[iy, ix]) / wts.sum())
        cy = float(np.sum(wts * Y[iy, ix]) / wts.sum())
        winding, adjacent = _enclosing_winding(phi, qn, cut, iy, ix, n)
        rad = float(np.max(np.hypot(X[iy, ix] - cx, Y[iy, ix] - cy)))
        defects.append(Defect((cx, cy), winding, rad, np.column_stack([iy, ix]), adjacent))
    # degree-zero dips of |Q| are kept; callers filter on q_winding
    defects.sort(key=lambda d: (d.position[0], d.position[1]))
    return DefectSet(defects)


def _enclosing_winding(phi, qn, cut, iy, ix, n):
    y0, y1, x0, x1 = iy.min() - 1, iy.max() + 1, ix.min() - 1, ix.max() + 1
    while True:
        if y0 < 0 or x0 < 0 or y1 > n or x1 > n:
            # clip to the domain and report what the clipped loop sees
            y0, x0, y1, x1 = max(y0, 0), max(x0, 0), min(y1, n), min(x1, n)
            return loop_winding(_rect_loop(phi, y0, y1, x0, x1)), True
        ring = _rect_loop(qn, y0, y1, x0, x1)
        if np.all(ring >= cut):
            return loop_winding(_rect_loop(phi, y0, y1, x0, x1)), False
        y0, x0, y1, x1 = y0 - 1, x0 - 1, y1 + 1, x1 + 1


def _rect_loop(a, y0, y1, x0, x1):
    bottom = a[y0, x0:x1]
    right = a[y0:y1, x1]
    top = a[y1, x1:x0:-1]
    left = a[y1:y0:-1, x0]
    return np.concatenate([bottom, right, top, left])


def charged_defects(ds: DefectSet) -> DefectSet:
    return DefectSet([d for d in ds if d.q_winding != 0])


# ------------------------------------------------------------------ jump set


@dataclass
class JumpComponent:
    midpoints: np.ndarray
    length_raw: float
    length_corrected: float
    endpoints: np.ndarray


@dataclass
class JumpSet:
    midpoints: np.ndarray
    components: list

    def __len__(self):
        return len(self.components)


def director_flips(state: FieldState, zero_tol: float = 1e-5):
    """Sign flips of ``M . n`` relative to a continuously transported director.

    Returns ``(horizontal, vertical, nodes)``: boolean arrays of shapes
    ``(n+1, n)``, ``(n, n+1)`` and ``(n+1, n+1)``.  Nodes where ``|M . n|`` is
    below ``zero_tol * max|M|`` lie on the jump itself (a symmetric state puts
    the jump exactly on a grid line); they take no part in edge tests and are
    flagged instead when their two opposite neighbours carry opposite signs.
    """
    psi = director_angle(state)
    c, s = np.cos(psi), np.sin(psi)
    proj = state.m1 * c + state.m2 * s
    scale = float(np.max(state.m_norm)) or 1.0
    live = np.abs(proj) > zero_tol * scale

    def flips(sl_a, sl_b):
        align = np.sign(c[sl_a] * c[sl_b] + s[sl_a] * s[sl_b])
        return (proj[sl_a] * proj[sl_b] * align < 0) & live[sl_a] & live[sl_b]

    horiz = flips((slice(None), slice(None, -1)), (slice(None), slice(1, None)))
    vert = flips((slice(None, -1), slice(None)), (slice(1, None), slice(None)))
    nodes = np.zeros(proj.shape, dtype=bool)
    across_x = flips((slice(None), slice(None, -2)), (slice(None), slice(2, None)))
    across_y = flips((slice(None, -2), slice(None)), (slice(2, None), slice(None)))
    nodes[:, 1:-1] |= across_x & ~live[:, 1:-1]
    nodes[1:-1, :] |= across_y & ~live[1:-1, :]
    return horiz, vert, nodes


def extract_jump_set(state: FieldState, defects: DefectSet | None = None,
                     consts: PotentialConstants | None = None, min_crossings: int = 1) -> JumpSet:
    """Jump lines of M relative to the director of Q.

    An edge is a crossing when ``sign(M . n)`` flips with ``n`` transported
    along the edge; a node where ``M . n`` vanishes between two opposite
    neighbours of opposite sign is a crossing located at the node.  Crossings
    whose nodes all lie in one defect core are excluded.  Crossings closer
    than ``1.2 h`` are clustered into components; a component's length is
    reported raw (``h`` per crossing) and with the pi/4 staircase correction.
    """
    grid = state.grid
    hgrid = grid.h
    if defects is None:
        defects = detect_defects(state, consts)
    horiz, vert, nodes = director_flips(state)
    for d in defects:
        core = np.zeros(grid.shape, dtype=bool)
        core[d.nodes[:, 0], d.nodes[:, 1]] = True
        horiz &= ~(core[:, :-1] & core[:, 1:])
        vert &= ~(core[:-1, :] & core[1:, :])
        nodes &= ~core

    hy, hx = np.nonzero(horiz)
    vy, vx = np.nonzero(vert)
    ny, nx = np.nonzero(nodes)
    mids = np.concatenate([
        np.column_stack([hx + 0.5, hy]),
        np.column_stack([vx, vy + 0.5]),
        np.column_stack([nx, ny]),
    ]).astype(float) * hgrid
    if len(mids) == 0:
        return JumpSet(mids.reshape(0, 2), [])
    pairs = cKDTree(mids).query_pairs(1.2 * hgrid, output_type="ndarray")
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(mids),) * 2)
    _, lab = connected_components(adj, directed=False)
    comps = []
    for l in np.unique(lab):
        pts = mids[lab == l]
        if len(pts) < min_crossings:
            continue
        raw = len(pts) * hgrid
        comps.append(JumpComponent(pts, raw, raw * math.pi / 4, _extreme_pair(pts)))
    comps.sort(key=lambda c: -len(c.midpoints))
    return JumpSet(mids, comps)


def _extreme_pair(pts):
    if len(pts) == 1:
        return np.vstack([pts, pts])
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    return pts[[i, j]]


def point_segment_distance(p, a, b):
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    L2 = float(ab @ ab)
    t = 0.0 if L2 == 0 else np.clip(((p - a) @ ab) / L2, 0.0, 1.0)
    return np.linalg.norm(p - (a + np.multiply.outer(t, ab)), axis=-1)


def hausdorff_to_segment(pts, a, b, samples: int = 200) -> float:
    """Hausdorff distance between a point cloud and the segment ``[a, b]``."""
    pts = np.asarray(pts, dtype=float)
    d1 = float(np.max(point_segment_distance(pts, a, b)))
    t = np.linspace(0.0, 1.0, samples)[:, None]
    seg = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
    d2 = float(np.max(np.min(np.linalg.norm(seg[:, None, :] - pts[None, :, :], axis=-1), axis=1)))
    return max(d1, d2)


# ------------------------------------------------------------------ summary


def analysis_summary(state: FieldState, consts: PotentialConstants) -> dict:
    """Plain-data summary used for the analysis JSON output."""
    en = discrete_energy(state, consts)
    ds = detect_defects(state, consts)
    charged = charged_defects(ds)
    js = extract_jump_set(state, ds, consts)
    w, indet = winding_field(state)
    return {
        "energy": en.as_dict(),
        "defects": [
            {"x": d.position[0], "y": d.position[1], "charge": d.q_charge, "core_radius": d.core_radius}
            for d in charged
        ],
        "jump_components": [
            {"length_raw": c.length_raw, "length_corrected": c.length_corrected,
             "endpoints": c.endpoints.tolist()}
            for c in js.components
        ],
        "total_winding": int(w.sum()),
        "indeterminate_plaquettes": int(indet.sum()),
    }
