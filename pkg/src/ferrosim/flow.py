"""Crank-Nicolson integration of the L2 gradient flow of the discrete energy.

Unknowns are the interior node values of ``(q11, q12, m1, m2)``; boundary
nodes keep their Dirichlet values.  With mass weights ``2 eta1 h**2`` for the
Q components (``|dQ/dt|**2 = 2 (dq11/dt**2 + dq12/dt**2)``) and ``eta2 h**2``
for M, the rates returned by :func:`rhs` are exactly ``-grad E / mass`` for
the energy of :func:`ferrosim.diagnostics.discrete_energy`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .diagnostics import cell_dirichlet, cell_mean
from .fields import FieldState, Grid, initial_condition
from .potential import ModelParams, PotentialConstants, f_eps, grad_f_eps, hess_f_eps, potential_constants

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    def __init__(self, msg, time=None, iters=None, residual=None):
        super().__init__(msg)
        self.time, self.iters, self.residual = time, iters, residual


@dataclass
class FlowConfig:
    params: ModelParams
    grid_n: int = 50
    tau: float = 1e-3
    t_end: float = 1.0
    k: int = 1
    snapshot_times: tuple = ()
    picard_tol: float = 1e-10
    picard_max: int = 50
    linsolve_tol: float = 1e-10
    steady_tol: float = 1e-8
    max_halvings: int = 3
    stop_when_steady: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        for name in ("picard_tol", "linsolve_tol", "steady_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        self.snapshot_times = tuple(sorted(self.snapshot_times))


@dataclass
class StepReport:
    time: float
    energy_total: float
    energy_delta: float
    picard_iters: int
    max_update: float


def laplacian(a, h):
    """Five-point Laplacian at interior nodes, shape ``(n-1, n-1)``."""
    return (a[2:, 1:-1] + a[:-2, 1:-1] + a[1:-1, 2:] + a[1:-1, :-2] - 4.0 * a[1:-1, 1:-1]) / (h * h)


def rate_coefficients(params: ModelParams):
    """Diffusivities and reaction prefactors of the four equations."""
    eps = params.eps
    diff = np.array([1.0 / params.eta1] * 2 + [eps / params.eta2] * 2)
    react = np.array([0.5 / params.eta1] * 2 + [1.0 / params.eta2] * 2) / eps ** 2
    return diff, react


def mass_weights(params: ModelParams, h: float):
    return np.array([2 * params.eta1, 2 * params.eta1, params.eta2, params.eta2]) * h * h


def rhs(state: FieldState, consts: PotentialConstants):
    """Time derivatives of ``(q11, q12, m1, m2)``; zero on boundary nodes."""
    h = state.grid.h
    diff, react = rate_coefficients(consts.params)
    fields = (state.q11, state.q12, state.m1, state.m2)
    grads = grad_f_eps(*fields, consts)
    out = []
    for a, g, cd, cr in zip(fields, grads, diff, react):
        r = np.zeros_like(a)
        r[1:-1, 1:-1] = cd * laplacian(a, h) - cr * g[1:-1, 1:-1]
        out.append(r)
    return tuple(out)


def total_energy(state: FieldState, consts: PotentialConstants) -> float:
    """Same value as ``discrete_energy(...).total`` without the split terms."""
    eps = consts.params.eps
    s = state
    el = (cell_dirichlet(s.q11).sum() + cell_dirichlet(s.q12).sum()
          + 0.5 * eps * (cell_dirichlet(s.m1).sum() + cell_dirichlet(s.m2).sum()))
    pot = cell_mean(f_eps(s.q11, s.q12, s.m1, s.m2, consts)).sum() * s.grid.h ** 2 / eps ** 2
    return float(el + pot)


@lru_cache(maxsize=8)
def interior_laplacian(n: int):
    """Sparse five-point Laplacian on the ``(n-1)**2`` interior nodes (Dirichlet, h = 1/n)."""
    m = n - 1
    h = 1.0 / n
    T = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1])
    I = sp.identity(m)
    return ((sp.kron(I, T) + sp.kron(T, I)) / (h * h)).tocsc()


def boundary_contribution(a, h):
    """Part of the five-point Laplacian coming from boundary values, at interior nodes."""
    b = np.zeros((a.shape[0] - 2, a.shape[1] - 2))
    b[0, :] += a[0, 1:-1]
    b[-1, :] += a[-1, 1:-1]
    b[:, 0] += a[1:-1, 0]
    b[:, -1] += a[1:-1, -1]
    return b.ravel() / (h * h)


class CrankNicolson:
    """Implicit-midpoint (Crank-Nicolson) stepper with a frozen-Jacobian Newton solve.

    Each step solves ``y = x + tau F((x + y) / 2)``.  The linear operator
    ``I - tau/2 (diffusion + local reaction Jacobian)`` is factorised with
    SuperLU and reused across iterations and steps for as long as the
    iteration keeps contracting; it is refactorised otherwise.
    """

    def __init__(self, grid: Grid, consts: PotentialConstants, boundary_state: FieldState):
        self.grid = grid
        self.consts = consts
        self.n = grid.n
        self.N = (self.n - 1) ** 2
        self.diff, self.react = rate_coefficients(consts.params)
        self.L = interior_laplacian(self.n)
        h = grid.h
        self.bnd = np.concatenate([
            cd * boundary_contribution(a, h)
            for cd, a in zip(self.diff, (boundary_state.q11, boundary_state.q12,
                                         boundary_state.m1, boundary_state.m2))
        ])
        self.Ldiag = sp.block_diag([cd * self.L for cd in self.diff], format="csc")
        self._lu = None
        self._lu_tau = None
        self.factorizations = 0

    # vector <-> state
    def pack(self, state):
        return np.concatenate([a[1:-1, 1:-1].ravel() for a in (state.q11, state.q12, state.m1, state.m2)])

    def unpack_into(self, x, state):
        m = self.n - 1
        for i, a in enumerate((state.q11, state.q12, state.m1, state.m2)):
            a[1:-1, 1:-1] = x[i * self.N:(i + 1) * self.N].reshape(m, m)

    def F(self, x):
        N = self.N
        parts = [x[i * N:(i + 1) * N] for i in range(4)]
        g = grad_f_eps(*parts, self.consts)
        react = np.concatenate([-cr * gi for cr, gi in zip(self.react, g)])
        return self.Ldiag @ x + self.bnd + react

    def _factor(self, x, tau):
        N = self.N
        parts = [x[i * N:(i + 1) * N] for i in range(4)]
        Hs = hess_f_eps(*parts, self.consts)
        blocks = [[None] * 4 for _ in range(4)]
        for i in range(4):
            for j in range(4):
                blocks[i][j] = sp.diags(0.5 * tau * self.react[i] * Hs[i, j])
        J = sp.bmat(blocks, format="csc") + sp.identity(4 * N, format="csc") - 0.5 * tau * self.Ldiag
        self._lu = splu(J.tocsc())
        self._lu_tau = tau
        self.factorizations += 1

    def solve_step(self, x0, tau, tol, maxit):
        """Return ``(y, iterations)`` or raise :class:`StepFailure`."""
        if self._lu is None or self._lu_tau != tau:
            self._factor(x0, tau)
        y = x0.copy()
        refactors = 0
        prev = math.inf
        with np.errstate(over="ignore", invalid="ignore"):
            for it in range(1, maxit + 1):
                G = y - x0 - tau * self.F(0.5 * (x0 + y))
                dy = self._lu.solve(G)
                y = y - dy
                upd = float(np.max(np.abs(dy)))
                if upd < tol:
                    return y, it
                if not np.isfinite(upd) or (upd > 1.0 and upd > prev):
                    # diverging: let the caller retry with a smaller step
                    raise StepFailure("nonlinear iteration diverged", iters=it, residual=upd)
                if upd > 0.3 * prev and refactors < 3:
                    self._factor(0.5 * (x0 + y), tau)
                    refactors += 1
                prev = upd
        raise StepFailure(f"nonlinear iteration did not converge in {maxit} iterations",
                          iters=maxit, residual=prev)


def step(state: FieldState, config: FlowConfig, consts: PotentialConstants,
         stepper: CrankNicolson | None = None, energy: float | None = None):
    """Advance ``state`` by one time step ``config.tau``; returns ``(new_state, report)``.

    On non-convergence the step is retried as two half steps, recursively, at
    most ``config.max_halvings`` times.
    """
    if stepper is None:
        stepper = CrankNicolson(state.grid, consts, state)
    if energy is None:
        energy = total_energy(state, consts)
    x0 = stepper.pack(state)
    x1, iters = _advance(stepper, x0, config.tau, config, 0)
    new = state.copy()
    stepper.unpack_into(x1, new)
    new.time = state.time + config.tau
    e1 = total_energy(new, consts)
    rep = StepReport(new.time, e1, e1 - energy, iters, float(np.max(np.abs(x1 - x0))))
    return new, rep


def _advance(stepper, x0, tau, config, depth):
    try:
        return stepper.solve_step(x0, tau, config.picard_tol, config.picard_max)
    except StepFailure as exc:
        if depth >= config.max_halvings:
            raise StepFailure(f"step failed after {depth} halvings of tau: {exc}",
                              iters=exc.iters, residual=exc.residual) from None
        log.info("halving tau to %g", tau / 2)
        xm, i1 = _advance(stepper, x0, tau / 2, config, depth + 1)
        x1, i2 = _advance(stepper, xm, tau / 2, config, depth + 1)
        return x1, i1 + i2


@dataclass
class FlowResult:
    final: FieldState
    snapshots: dict
    reports: list = field(default_factory=list)
    steady: bool = False

    @property
    def energies(self):
        return np.array([r.energy_total for r in self.reports])


def run(config: FlowConfig, initial: FieldState | None = None, callback=None) -> FlowResult:
    """Integrate to ``config.t_end``, or until ``max_update / tau < steady_tol``.

    Snapshots are taken at the steps nearest to ``config.snapshot_times``;
    times after an early steady stop receive the final state.
    """
    consts = potential_constants(config.params)
    if initial is None:
        initial = initial_condition(Grid(config.grid_n), config.k, config.params)
    state = initial.copy()
    stepper = CrankNicolson(state.grid, consts, state)
    nsteps = int(round(config.t_end / config.tau))
    snap_steps = {int(round(t / config.tau)): t for t in config.snapshot_times}
    snapshots = {}
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = state.copy()
    reports = []
    energy = total_energy(state, consts)
    steady = False
    for i in range(1, nsteps + 1):
        try:
            state, rep = step(state, config, consts, stepper, energy)
        except StepFailure as exc:
            exc.time = state.time
            raise
        # keep the clock on the step lattice
        state.time = i * config.tau
        rep.time = state.time
        energy = rep.energy_total
        reports.append(rep)
        if callback is not None:
            callback(state, rep)
        if i in snap_steps:
            snapshots[snap_steps[i]] = state.copy()
        if config.stop_when_steady and rep.max_update / config.tau < config.steady_tol:
            steady = True
            break
    for t in config.snapshot_times:
        snapshots.setdefault(t, state.copy())
    log.info("flow finished at t=%g after %d steps, %d factorisations",
             state.time, len(reports), stepper.factorizations)
    return FlowResult(state, snapshots, reports, steady)


def euler_lagrange_residual(state: FieldState, consts: PotentialConstants) -> float:
    """Max-norm of the rates at interior nodes (zero exactly at discrete critical points)."""
    return float(max(np.max(np.abs(r)) for r in rhs(state, consts)))
