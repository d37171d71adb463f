"""One-dimensional optimal transition profile of the magnetisation across a jump line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .potential import SQRT2, H, c_beta, lambda_star


@dataclass
class Profile:
    ts: np.ndarray
    us: np.ndarray
    beta: float
    energy: float = float("nan")


def tanh_profile(t, beta):
    """Closed-form solution of ``u' = H(u)``, ``u(0) = 0``."""
    lam = lambda_star(beta)
    return lam * np.tanh(lam * np.asarray(t) / SQRT2)


def optimal_profile(beta: float, t_max: float | None = None, n_samples: int = 10_000) -> Profile:
    """Integrate the first-order equation ``u' = H(u)`` from ``u(0) = 0`` with classical RK4.

    Parameters
    ----------
    beta : float
        Coupling strength.
    t_max : float, optional
        End of the integration interval; defaults to ``20 / lambda*``.
    n_samples : int
        Number of samples, endpoints included.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    lam = lambda_star(beta)
    if t_max is None:
        t_max = 20.0 / lam
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    ts = np.linspace(0.0, t_max, n_samples)
    dt = ts[1] - ts[0]
    us = np.empty(n_samples)
    u = 0.0
    us[0] = u
    rhs = lambda v: (lam * lam - v * v) / SQRT2  # H(u) for 0 <= u <= lam
    for i in range(1, n_samples):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        us[i] = u
    prof = Profile(ts, us, beta)
    prof.energy = profile_cost(prof)
    return prof


def profile_cost(profile: Profile) -> float:
    """``int (u'^2 / 2 + H(u)^2 / 2) dt`` by Simpson's rule; ``u'`` from the equation."""
    Hu = H(profile.us, profile.beta)
    du = (lambda_star(profile.beta) ** 2 - profile.us ** 2) / SQRT2
    return float(integrate.simpson(0.5 * du ** 2 + 0.5 * Hu ** 2, x=profile.ts))


def first_integral_residual(profile: Profile) -> float:
    """``max |u'^2 - H(u)^2|`` over interior samples, ``u'`` by sixth-order central differences."""
    dt = profile.ts[1] - profile.ts[0]
    u = profile.us
    du = (-u[:-6] + 9 * u[1:-5] - 45 * u[2:-4] + 45 * u[4:-2] - 9 * u[5:-1] + u[6:]) / (60 * dt)
    return float(np.max(np.abs(du ** 2 - H(u[3:-3], profile.beta) ** 2)))


def interface_cost_by_substitution(beta: float) -> float:
    """``int_0^lambda* H(u) du`` by adaptive quadrature; equals ``c_beta / 2``."""
    val, _ = integrate.quad(lambda v: H(v, beta), 0.0, lambda_star(beta), epsabs=1e-14, epsrel=1e-13)
    return val


def path_cost(path, beta: float) -> float:
    """Geodesic cost ``int sqrt(2 h(u)) |u'| dt`` of a sampled planar path ``(N, 2)``.

    Evaluated on the segment midpoints of the polyline.
    """
    from .potential import h

    p = np.asarray(path, dtype=float)
    mid = 0.5 * (p[1:] + p[:-1])
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    return float(np.sum(np.sqrt(2.0 * np.maximum(h(mid[:, 0], mid[:, 1], beta), 0.0)) * seg))


def half_cost(beta: float) -> float:
    return 0.5 * c_beta(beta)
