"""Bulk potential of the ferronematic energy and its auxiliary scalar functions.

The Q-tensor is stored through its two independent entries ``(q11, q12)`` of
the symmetric trace-free matrix ``[[q11, q12], [q12, -q11]]``; its Frobenius
norm is ``|Q|**2 = 2 (q11**2 + q12**2)``.  All functions broadcast over numpy
arrays, so the same code evaluates single points and whole grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


class RootSolveError(RuntimeError):
    """The bracketed root search for the minimiser norm did not converge."""


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters.

    ``eta2`` defaults to ``eps``, the friction used in the reference
    simulations (with ``eta1 = 1``).
    """

    beta: float
    eps: float
    eta1: float = 1.0
    eta2: float | None = None

    def __post_init__(self):
        if self.eta2 is None:
            object.__setattr__(self, "eta2", self.eps)
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        for name in ("eps", "eta1", "eta2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class PotentialConstants:
    params: ModelParams
    x_eps: float
    s_eps: float
    lambda_eps: float
    kappa_eps: float
    kappa_star: float
    c_beta: float
    lambda_star: float


def kappa_star(beta):
    return beta * (SQRT2 * beta + 1.0) / (2.0 * SQRT2)


def c_beta(beta):
    """Energy per unit length of a magnetisation jump line."""
    return (2.0 * SQRT2 / 3.0) * (SQRT2 * beta + 1.0) ** 1.5


def lambda_star(beta):
    return math.sqrt(SQRT2 * beta + 1.0)


def _solve_y(beta, eps, tol=1e-16, maxiter=200):
    # X = 1 + b^2 e + b e Y turns the cubic into Y^2 (2 + 2 b^2 e + 2 b e Y) = 1,
    # which is monotone in Y on (0, 1/sqrt2] and free of cancellation near X = 1.
    def g(y):
        return y * y * (2.0 + 2.0 * beta * beta * eps + 2.0 * beta * eps * y) - 1.0

    lo, hi = 0.0, 1.0 / SQRT2
    if g(hi) < 0:
        raise RootSolveError(f"root not bracketed for beta={beta}, eps={eps}")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    else:
        raise RootSolveError(f"bisection stalled for beta={beta}, eps={eps}")
    y = 0.5 * (lo + hi)
    for _ in range(20):
        dg = 2.0 * y * (2.0 + 2.0 * beta * beta * eps) + 6.0 * beta * eps * y * y
        step = g(y) / dg
        y -= step
        if abs(step) <= tol * max(1.0, y):
            break
    if not lo - 1e-9 <= y <= hi + 1e-9:
        raise RootSolveError(f"Newton polish left the bracket for beta={beta}, eps={eps}")
    return y


def solve_x_eps(params: ModelParams) -> float:
    """Squared norm of Q at the minimum of the bulk potential.

    Returns the unique ``X > 1 + beta**2 eps`` with
    ``X (X - 1 - beta**2 eps)**2 = beta**2 eps**2 / 2``.  For ``beta = 0`` the
    coupling vanishes and the degenerate value 1 is returned.
    """
    beta, eps = params.beta, params.eps
    if beta == 0:
        return 1.0
    y = _solve_y(beta, eps)
    return 1.0 + beta * beta * eps + beta * eps * y


def cubic_residual(x, params: ModelParams) -> float:
    b2e = params.beta ** 2 * params.eps
    return x * (x - 1.0 - b2e) ** 2 - 0.5 * params.beta ** 2 * params.eps ** 2


def potential_constants(params: ModelParams) -> PotentialConstants:
    beta, eps = params.beta, params.eps
    if beta == 0:
        x, s, lam, kappa = 1.0, 1.0, 1.0, 0.0
    else:
        y = _solve_y(beta, eps)
        x = 1.0 + beta * beta * eps + beta * eps * y
        s = math.sqrt(x)
        lam2 = 1.0 + beta / y
        lam = math.sqrt(lam2)
        s2m1 = beta * beta * eps + beta * eps * y
        kappa = (-0.25 * s2m1 ** 2 - 0.25 * eps * (lam2 - 1.0) ** 2
                 + beta * eps / SQRT2 * s * lam2)
    return PotentialConstants(
        params=params,
        x_eps=x,
        s_eps=s,
        lambda_eps=lam,
        kappa_eps=kappa,
        kappa_star=kappa_star(beta),
        c_beta=c_beta(beta),
        lambda_star=lambda_star(beta),
    )


def q_norm(q11, q12):
    """Frobenius norm of the Q-tensor."""
    return np.sqrt(2.0 * (q11 * q11 + q12 * q12))


def qmm(q11, q12, m1, m2):
    """The contraction ``Q M . M``."""
    return q11 * (m1 * m1 - m2 * m2) + 2.0 * q12 * m1 * m2


def f_eps(q11, q12, m1, m2, consts: PotentialConstants):
    """Bulk potential, normalised so that its infimum is zero."""
    beta, eps = consts.params.beta, consts.params.eps
    s = 2.0 * (q11 * q11 + q12 * q12)
    t = m1 * m1 + m2 * m2
    return (0.25 * (s - 1.0) ** 2 + 0.25 * eps * (t - 1.0) ** 2
            - beta * eps * qmm(q11, q12, m1, m2) + consts.kappa_eps)


def grad_f_eps(q11, q12, m1, m2, consts: PotentialConstants):
    """Partial derivatives of ``f_eps`` in ``(q11, q12, m1, m2)``."""
    beta, eps = consts.params.beta, consts.params.eps
    s1 = 2.0 * (q11 * q11 + q12 * q12) - 1.0
    t1 = m1 * m1 + m2 * m2 - 1.0
    be = beta * eps
    d11 = 2.0 * q11 * s1 - be * (m1 * m1 - m2 * m2)
    d12 = 2.0 * q12 * s1 - 2.0 * be * m1 * m2
    dm1 = eps * t1 * m1 - 2.0 * be * (q11 * m1 + q12 * m2)
    dm2 = eps * t1 * m2 - 2.0 * be * (q12 * m1 - q11 * m2)
    return d11, d12, dm1, dm2


def hess_f_eps(q11, q12, m1, m2, consts: PotentialConstants):
    """Second derivatives of ``f_eps`` as a ``(4, 4, ...)`` array."""
    beta, eps = consts.params.beta, consts.params.eps
    be = beta * eps
    s1 = 2.0 * (q11 * q11 + q12 * q12) - 1.0
    t1 = m1 * m1 + m2 * m2 - 1.0
    shape = np.broadcast(q11, q12, m1, m2).shape
    H = np.empty((4, 4) + shape)
    H[0, 0] = 2.0 * s1 + 8.0 * q11 * q11
    H[0, 1] = H[1, 0] = 8.0 * q11 * q12
    H[1, 1] = 2.0 * s1 + 8.0 * q12 * q12
    H[0, 2] = H[2, 0] = -2.0 * be * m1
    H[0, 3] = H[3, 0] = 2.0 * be * m2
    H[1, 2] = H[2, 1] = -2.0 * be * m2
    H[1, 3] = H[3, 1] = -2.0 * be * m1
    H[2, 2] = eps * t1 + 2.0 * eps * m1 * m1 - 2.0 * be * q11
    H[2, 3] = H[3, 2] = 2.0 * eps * m1 * m2 - 2.0 * be * q12
    H[3, 3] = eps * t1 + 2.0 * eps * m2 * m2 + 2.0 * be * q11
    return H


def minimiser(angle, consts: PotentialConstants):
    """A zero of ``f_eps`` with magnetisation along ``(cos angle, sin angle)``."""
    lam, s = consts.lambda_eps, consts.s_eps
    m1, m2 = lam * np.cos(angle), lam * np.sin(angle)
    # sqrt2 s (M x M / lam^2 - I/2) in component form
    q11 = s / SQRT2 * np.cos(2 * angle)
    q12 = s / SQRT2 * np.sin(2 * angle)
    return q11, q12, m1, m2


def g_eps(qn, consts: PotentialConstants):
    """Q-part of the split potential, as a function of ``|Q|``."""
    eps, ks = consts.params.eps, consts.kappa_star
    return 0.25 / eps ** 2 * (qn * qn - 1.0) ** 2 - 2.0 * ks / eps * (qn - 1.0) + ks * ks


def g_eps_identity(qn, consts: PotentialConstants):
    """Sum-of-squares rewriting of ``g_eps`` (non-negativity certificate)."""
    eps, ks = consts.params.eps, consts.kappa_star
    return ((qn - 1.0) / eps - ks) ** 2 + (qn - 1.0) ** 2 / eps ** 2 * (0.25 * (qn + 1.0) ** 2 - 1.0)


def h(u1, u2, beta):
    """Magnetisation part of the split potential in the eigenframe of Q."""
    r2 = u1 * u1 + u2 * u2
    return (0.25 * (r2 - 1.0) ** 2 - beta / SQRT2 * (u1 * u1 - u2 * u2)
            + 0.5 * (beta * beta + SQRT2 * beta))


def H(u1, beta):
    """``sqrt(2 h(u1, 0))`` in closed form."""
    return np.abs(SQRT2 * beta + 1.0 - u1 * u1) / SQRT2
