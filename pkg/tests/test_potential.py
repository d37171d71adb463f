import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ferrosim.potential import (
    SQRT2, H, ModelParams, RootSolveError, c_beta, cubic_residual, f_eps, g_eps, g_eps_identity,
    grad_f_eps, h, hess_f_eps, kappa_star, lambda_star, minimiser, potential_constants, solve_x_eps,
)


def consts(beta=1.0, eps=0.05):
    return potential_constants(ModelParams(beta, eps))


def random_fields(rng, n, qmax=2.0, mmax=3.0):
    qn = rng.uniform(0, qmax, n)
    a = rng.uniform(0, 2 * np.pi, n)
    mn = rng.uniform(0, mmax, n)
    b = rng.uniform(0, 2 * np.pi, n)
    return qn / SQRT2 * np.cos(a), qn / SQRT2 * np.sin(a), mn * np.cos(b), mn * np.sin(b)


# ------------------------------------------------------------------ params

def test_eta2_defaults_to_eps():
    assert ModelParams(1.0, 0.02).eta2 == 0.02


@pytest.mark.parametrize("kw", [dict(beta=-1, eps=0.1), dict(beta=1, eps=0), dict(beta=1, eps=0.1, eta1=0),
                                dict(beta=1, eps=0.1, eta2=-1.0)])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


# ------------------------------------------------------------ closed forms

def test_closed_form_constants_beta_one():
    assert kappa_star(1.0) == pytest.approx(oracles.KAPPA_STAR_B1, abs=1e-15)
    assert c_beta(1.0) == pytest.approx(oracles.C_BETA_B1, abs=1e-14)
    assert lambda_star(1.0) == pytest.approx(oracles.LAMBDA_STAR_B1, abs=1e-15)
    assert kappa_star(1.0) == pytest.approx(0.8535534, abs=1e-7)
    assert lambda_star(1.0) == pytest.approx(1.5537740, abs=1e-7)


def test_c_beta_equals_quadrature_of_h_on_axis():
    from scipy.integrate import quad
    for beta in (0.0, 0.5, 1.0, 2.0, 5.0):
        lam = lambda_star(beta)
        val, _ = quad(lambda u: math.sqrt(2 * h(u, 0.0, beta)), -lam, lam, epsabs=1e-13)
        assert val == pytest.approx(c_beta(beta), rel=1e-10)


# --------------------------------------------------------------- the cubic

def test_x_eps_frozen_value():
    assert solve_x_eps(ModelParams(1.0, 0.05)) == pytest.approx(oracles.X_EPS_B1_E005, abs=1e-15)


@pytest.mark.parametrize("beta", [0.1, 1.0, 3.0, 10.0, 100.0])
@pytest.mark.parametrize("eps", [1e-4, 1e-2, 0.1, 1.0])
def test_x_eps_against_mp_bisection(beta, eps):
    p = ModelParams(beta, eps)
    x = solve_x_eps(p)
    assert x == pytest.approx(float(oracles.x_eps(beta, eps)), rel=1e-14)
    assert x > 1 + beta ** 2 * eps
    assert abs(cubic_residual(x, p)) < 1e-13 * x ** 3


def test_x_eps_degenerate_beta_zero():
    assert solve_x_eps(ModelParams(0.0, 0.1)) == 1.0
    c = consts(0.0, 0.3)
    assert (c.kappa_eps, c.kappa_star, c.lambda_star) == (0.0, 0.0, 1.0)


def test_x_eps_small_eps_expansion():
    beta = 1.7
    for eps in (1e-3, 1e-4, 1e-5):
        x = solve_x_eps(ModelParams(beta, eps))
        lead = (SQRT2 * beta + 1) * beta * eps / SQRT2
        assert (x - 1) / lead == pytest.approx(1.0, abs=5 * beta * eps)


def test_x_eps_near_expansion_at_reference():
    # 1 + 0.085355 - 0.001509 from the two-term expansion
    assert solve_x_eps(ModelParams(1.0, 0.05)) == pytest.approx(1.0838, abs=2e-4)


def test_root_solver_reports_unbracketed_root():
    with pytest.raises(RootSolveError):
        from ferrosim.potential import _solve_y
        _solve_y(-0.5, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(1e-4, 0.1))
def test_constants_invariants(beta, eps):
    c = consts(beta, eps)
    x = c.x_eps
    assert abs(cubic_residual(x, c.params)) < 1e-13 * x ** 3
    assert c.s_eps ** 2 == pytest.approx(x, rel=1e-14)
    assert c.lambda_eps ** 2 == pytest.approx((x - 1) / (x - 1 - beta ** 2 * eps), rel=1e-9)
    assert c.kappa_eps >= -1e-12


@pytest.mark.parametrize("beta,eps", [(1.0, 0.05), (2.0, 0.01), (0.3, 0.2), (5.0, 1e-3)])
def test_kappa_eps_against_mp_minimisation(beta, eps):
    assert consts(beta, eps).kappa_eps == pytest.approx(float(oracles.kappa_eps(beta, eps)), rel=1e-12, abs=1e-15)


def test_kappa_eps_expansion():
    beta = 1.0
    ks = kappa_star(beta)
    errs = []
    for eps in (1e-2, 1e-3, 1e-4):
        k = consts(beta, eps).kappa_eps
        errs.append(abs(k - 0.5 * (beta ** 2 + SQRT2 * beta) * eps - ks ** 2 * eps ** 2) / eps ** 2)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


# --------------------------------------------------------------- potential

def test_potential_vanishes_at_minimiser():
    c = consts()
    ang = np.linspace(0, 2 * np.pi, 17)
    assert np.max(np.abs(f_eps(*minimiser(ang, c), c))) < 1e-10
    g = grad_f_eps(*minimiser(ang, c), c)
    assert max(np.max(np.abs(gi)) for gi in g) < 1e-9


def test_potential_at_origin():
    c = consts()
    assert f_eps(0.0, 0.0, 0.0, 0.0, c) == pytest.approx(0.25 + 0.05 / 4 + c.kappa_eps, abs=1e-15)


def test_potential_nonnegative_on_random_samples():
    rng = np.random.default_rng(1)
    for beta, eps in ((1.0, 0.05), (5.0, 0.01), (0.2, 0.5)):
        c = consts(beta, eps)
        assert f_eps(*random_fields(rng, 100_000), c).min() >= -1e-12


def test_potential_minimum_on_fine_grid():
    c = consts()
    qn = np.linspace(0.9, 1.2, 301)[:, None, None]
    mn = np.linspace(1.3, 1.8, 251)[None, :, None]
    rel = np.linspace(0, np.pi, 61)[None, None, :]    # angle between director of Q and M
    vals = f_eps(qn / SQRT2 * np.cos(2 * rel), qn / SQRT2 * np.sin(2 * rel), mn, 0 * mn, c)
    i = np.unravel_index(np.argmin(vals), vals.shape)
    assert vals.min() >= -1e-10
    assert qn.ravel()[i[0]] == pytest.approx(c.s_eps, abs=1e-3)
    assert mn.ravel()[i[1]] == pytest.approx(c.lambda_eps, abs=2e-3)
    assert min(rel.ravel()[i[2]], np.pi - rel.ravel()[i[2]]) < 1e-12


def test_boundary_relation_value_is_kappa_star_squared_eps_squared():
    # the pair |M| = lambda*, Q = sqrt2 (M x M / lambda*^2 - I/2)
    beta = 1.0
    ratios = []
    for eps in (1e-2, 1e-3, 1e-4):
        c = consts(beta, eps)
        lam = c.lambda_star
        val = f_eps(1 / SQRT2, 0.0, lam, 0.0, c)
        ratios.append(val / eps ** 2)
    assert ratios[-1] == pytest.approx(kappa_star(beta) ** 2, rel=1e-3)
    assert abs(ratios[-1] - kappa_star(beta)) > 0.1


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4), st.floats(0.1, 5.0), st.floats(0.01, 0.5))
def test_gradient_matches_finite_differences(x, beta, eps):
    c = consts(beta, eps)
    x = np.array(x)
    g = np.array(grad_f_eps(*x, c))
    step = 1e-6
    fd = np.empty(4)
    for i in range(4):
        e = np.zeros(4)
        e[i] = step
        fd[i] = (f_eps(*(x + e), c) - f_eps(*(x - e), c)) / (2 * step)
    scale = max(1.0, float(np.max(np.abs(g))))
    assert np.max(np.abs(fd - g)) < 1e-5 * scale


def test_gradient_on_random_batch():
    rng = np.random.default_rng(2)
    c = consts()
    X = np.array(random_fields(rng, 1000, 1.5, 2.0))
    g = np.array(grad_f_eps(*X, c))
    fd = np.empty_like(g)
    for i in range(4):
        e = np.zeros((4, 1))
        e[i] = 1e-6
        fd[i] = (f_eps(*(X + e), c) - f_eps(*(X - e), c)) / 2e-6
    rel = np.abs(fd - g) / np.maximum(np.abs(g), 1e-3)
    assert rel.max() < 1e-5


def test_hessian_matches_finite_differences_of_gradient():
    rng = np.random.default_rng(3)
    c = consts(2.0, 0.1)
    X = np.array(random_fields(rng, 50))
    Hm = hess_f_eps(*X, c)
    for j in range(4):
        e = np.zeros((4, 1))
        e[j] = 1e-6
        col = (np.array(grad_f_eps(*(X + e), c)) - np.array(grad_f_eps(*(X - e), c))) / 2e-6
        assert np.allclose(Hm[:, j], col, atol=1e-6)
    assert np.allclose(Hm, np.swapaxes(Hm, 0, 1))


def test_gradient_vanishes_for_unit_q_and_zero_m():
    c = consts()
    g = grad_f_eps(np.cos(0.3) / SQRT2, np.sin(0.3) / SQRT2, 0.0, 0.0, c)
    assert max(abs(v) for v in g) < 1e-15


# ------------------------------------------------------------- split form

def test_g_eps_values():
    c = consts()
    ks, eps = c.kappa_star, 0.05
    assert g_eps(1.0, c) == pytest.approx(ks ** 2, abs=1e-15)
    assert g_eps(1 + ks * eps, c) == pytest.approx(ks ** 2 * (ks * eps + ks ** 2 * eps ** 2 / 4), rel=1e-12)


def test_g_eps_identity_and_sign():
    rng = np.random.default_rng(4)
    qn = rng.uniform(0, 2, 100_000)
    c = consts()
    assert np.max(np.abs(g_eps(qn, c) - g_eps_identity(qn, c))) < 1e-12 * np.max(np.abs(g_eps(qn, c)))
    assert g_eps(qn, c).min() >= 0


def test_h_properties():
    beta = 1.0
    lam = lambda_star(beta)
    assert h(lam, 0.0, beta) == pytest.approx(0.0, abs=1e-15)
    assert h(-lam, 0.0, beta) == pytest.approx(0.0, abs=1e-15)
    assert h(0.0, 0.0, beta) == pytest.approx(oracles.H_ORIGIN_B1, abs=1e-15)
    rng = np.random.default_rng(5)
    u = rng.normal(size=(2, 10_000)) * 2
    v = h(u[0], u[1], beta)
    assert v.min() >= 0
    assert np.allclose(v, h(-u[0], u[1], beta)) and np.allclose(v, h(u[0], -u[1], beta))
    assert np.allclose(H(u[0], beta), np.sqrt(2 * h(u[0], 0 * u[0], beta)), atol=1e-12)


def test_h_hessian_at_zeros():
    beta, d = 2.0, 1e-4
    for s in (1, -1):
        u = np.array([s * lambda_star(beta), 0.0])
        Hm = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                ei, ej = np.eye(2)[i] * d, np.eye(2)[j] * d
                Hm[i, j] = (h(*(u + ei + ej), beta) - h(*(u + ei - ej), beta)
                            - h(*(u - ei + ej), beta) + h(*(u - ei - ej), beta)) / (4 * d * d)
        assert np.allclose(Hm, np.diag([2 + 2 * SQRT2 * beta, 2 * SQRT2 * beta]), atol=1e-6)


def test_potential_splits_into_g_and_h():
    # |Q|/sqrt2 (u1^2 - u2^2) = QM.M, so f / eps^2 = g + h / eps + remainder terms;
    # at |Q| = 1 the remainder is (|M|^2 (1 - 1) ...) = 0 and the identity is exact
    from ferrosim.potential import qmm
    beta, eps = 1.0, 0.05
    c = consts(beta, eps)
    rng = np.random.default_rng(6)
    a, u1, u2 = rng.uniform(0, 2 * np.pi, 200), rng.normal(size=200), rng.normal(size=200)
    n = np.stack([np.cos(a / 2), np.sin(a / 2)])
    m = np.stack([-np.sin(a / 2), np.cos(a / 2)])
    M = u1 * n + u2 * m
    q11, q12 = np.cos(a) / SQRT2, np.sin(a) / SQRT2
    assert np.allclose(qmm(q11, q12, M[0], M[1]), (u1 ** 2 - u2 ** 2) / SQRT2, atol=1e-12)
    lhs = f_eps(q11, q12, M[0], M[1], c) / eps ** 2
    rhs = g_eps(1.0, c) + h(u1, u2, beta) / eps + (c.kappa_eps / eps ** 2 - 0.5 * (beta ** 2 + SQRT2 * beta) / eps
                                                  - c.kappa_star ** 2)
    assert np.allclose(lhs, rhs, atol=1e-9)
