"""Uniform node grid on the unit square, field storage and degree-k data."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .potential import SQRT2, ModelParams, kappa_star, lambda_star


@dataclass(frozen=True)
class Grid:
    """``(n+1) x (n+1)`` nodes of ``[0, 1]^2``; arrays are indexed ``[iy, ix]``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs an integer n >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self):
        return (self.n + 1, self.n + 1)

    @property
    def coords(self):
        t = np.arange(self.n + 1) / self.n
        X, Y = np.meshgrid(t, t, indexing="xy")
        return X, Y

    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        return mask

    def boundary_loop(self):
        """``(iy, ix)`` index arrays of the boundary nodes, counter-clockwise from (0, 0)."""
        n = self.n
        r = np.arange(n)
        ix = np.concatenate([r, np.full(n, n), n - r, np.zeros(n, dtype=int)])
        iy = np.concatenate([np.zeros(n, dtype=int), r, np.full(n, n), n - r])
        return iy, ix


@dataclass
class FieldState:
    grid: Grid
    q11: np.ndarray
    q12: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("q11", "q12", "m1", "m2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid needs {self.grid.shape}")
            setattr(self, name, arr)

    def copy(self) -> "FieldState":
        return replace(self, q11=self.q11.copy(), q12=self.q12.copy(),
                       m1=self.m1.copy(), m2=self.m2.copy(), meta=dict(self.meta))

    @property
    def q_norm(self):
        return np.sqrt(2.0 * (self.q11 ** 2 + self.q12 ** 2))

    @property
    def m_norm(self):
        return np.hypot(self.m1, self.m2)

    def q_matrix(self):
        """Full ``(..., 2, 2)`` tensor field; symmetric and trace-free by construction."""
        Q = np.empty(self.grid.shape + (2, 2))
        Q[..., 0, 0] = self.q11
        Q[..., 0, 1] = Q[..., 1, 0] = self.q12
        Q[..., 1, 1] = -self.q11
        return Q


def polar_angle(X, Y):
    return np.arctan2(Y - 0.5, X - 0.5) - math.pi / 2


def degree_k_fields(theta, k, beta):
    """M of degree ``k`` with ``|M| = lambda*`` and the Q it orients."""
    lam = lambda_star(beta)
    m1 = lam * np.cos(k * theta)
    m2 = lam * np.sin(k * theta)
    q11 = np.cos(2 * k * theta) / SQRT2
    q12 = np.sin(2 * k * theta) / SQRT2
    return q11, q12, m1, m2


def boundary_data(grid: Grid, k: int, params: ModelParams):
    """Dirichlet data along ``grid.boundary_loop()``, as four 1-d arrays."""
    if k < 1:
        raise ValueError("boundary degree k must be >= 1")
    X, Y = grid.coords
    iy, ix = grid.boundary_loop()
    theta = polar_angle(X[iy, ix], Y[iy, ix])
    return degree_k_fields(theta, k, params.beta)


def initial_condition(grid: Grid, k: int, params: ModelParams) -> FieldState:
    if k < 1:
        raise ValueError("boundary degree k must be >= 1")
    X, Y = grid.coords
    # np.arctan2(0, 0) == 0 fixes the value at the centre node
    q11, q12, m1, m2 = degree_k_fields(polar_angle(X, Y), k, params.beta)
    return FieldState(grid, q11, q12, m1, m2, 0.0, {"k": k})


def pin_boundary(state: FieldState, k: int, params: ModelParams) -> None:
    iy, ix = state.grid.boundary_loop()
    for arr, vals in zip((state.q11, state.q12, state.m1, state.m2),
                         boundary_data(state.grid, k, params)):
        arr[iy, ix] = vals


def seeded_state(grid: Grid, params: ModelParams, defects, connection, k: int | None = None) -> FieldState:
    """Recovery-type state with half-charge defects at ``defects``.

    Q is the canonical harmonic map with its modulus truncated to
    ``min(rho / eps, 1) (1 + kappa* eps)`` (``rho`` the distance to the nearest
    defect); M is the jump lifting of Q along ``connection``, smoothed across
    each segment by the optimal one-dimensional profile.
    """
    from .geometry import canonical_angle, distance_to_segments, sbv_lifting
    from .profile1d import tanh_profile

    pts = np.asarray(defects, dtype=float).reshape(-1, 2)
    if k is None:
        k = len(pts) // 2
    margin = 4 * grid.h
    if np.any(pts < margin) or np.any(pts > 1 - margin):
        raise ValueError(f"defects must keep a distance {margin:g} (4h) from the boundary")
    eps, beta = params.eps, params.beta
    angle = canonical_angle(pts, k, grid)
    X, Y = grid.coords
    rho = np.min(np.hypot(X[..., None] - pts[:, 0], Y[..., None] - pts[:, 1]), axis=-1)
    qn = np.minimum(rho / eps, 1.0) * (1.0 + kappa_star(beta) * eps)
    q11 = qn / SQRT2 * np.cos(angle.theta)
    q12 = qn / SQRT2 * np.sin(angle.theta)

    n1, n2 = sbv_lifting(angle, connection, params)
    segs = [(pts[i], pts[j]) for i, j in connection.pairing]
    dist = distance_to_segments(X, Y, segs)
    amp = tanh_profile(dist / eps, beta)
    state = FieldState(grid, q11, q12, amp * n1, amp * n2, 0.0, {"k": k})
    pin_boundary(state, k, params)
    return state


# ---------------------------------------------------------------- CSV format

_HEADER = re.compile(r"#\s*n=(\S+)\s+h=(\S+)\s+time=(\S+)\s+beta=(\S+)\s+eps=(\S+)")


class FieldFormatError(ValueError):
    def __init__(self, msg, line=None, column=None):
        where = "" if line is None else f"line {line}" + ("" if column is None else f", column {column}")
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line, self.column = line, column


def write_state_csv(path, state: FieldState, params: ModelParams) -> None:
    g = state.grid
    X, Y = g.coords
    cols = np.column_stack([a.ravel() for a in (X, Y, state.q11, state.q12, state.m1, state.m2)])
    lines = [f"# n={g.n} h={g.h!r} time={state.time!r} beta={params.beta!r} eps={params.eps!r}"]
    lines += [",".join(repr(float(v)) for v in row) for row in cols]
    Path(path).write_text("\n".join(lines) + "\n")


def read_state_csv(path):
    """Inverse of :func:`write_state_csv`; returns ``(state, beta, eps)``."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise FieldFormatError("empty file", 1)
    m = _HEADER.match(text[0])
    if not m:
        raise FieldFormatError("expected '# n=<n> h=<h> time=<t> beta=<b> eps=<e>' header", 1, 1)
    try:
        n = int(m.group(1))
        time, beta, eps = (float(m.group(i)) for i in (3, 4, 5))
    except ValueError as exc:
        raise FieldFormatError(f"bad header value ({exc})", 1) from None
    grid = Grid(n)
    rows = [ln for ln in text[1:]]
    if len(rows) != (n + 1) ** 2:
        raise FieldFormatError(f"expected {(n + 1) ** 2} data rows, found {len(rows)}", len(text))
    data = np.empty((len(rows), 6))
    for i, ln in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != 6:
            raise FieldFormatError(f"expected 6 comma-separated values, found {len(parts)}", i + 2)
        for j, p in enumerate(parts):
            try:
                data[i, j] = float(p)
            except ValueError:
                raise FieldFormatError(f"not a number: {p!r}", i + 2, j + 1) from None
    arrs = [data[:, c].reshape(grid.shape) for c in range(2, 6)]
    return FieldState(grid, *arrs, time=time), beta, eps
