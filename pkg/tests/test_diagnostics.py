import math

import numpy as np
import pytest

from ferrosim.diagnostics import (
    analysis_summary, boundary_winding, charged_defects, detect_defects, director_angle, discrete_energy,
    energy_density_cells, extract_jump_set, frame_decompose, hausdorff_to_segment, jacobian_integral,
    loop_winding, point_segment_distance, winding_field, wrap,
)
from ferrosim.fields import FieldState, Grid, initial_condition, seeded_state
from ferrosim.geometry import minimal_connection
from ferrosim.potential import SQRT2, ModelParams, h, lambda_star, minimiser, potential_constants, qmm

P = ModelParams(1.0, 0.05)
C = potential_constants(P)


def vortex_state(n, centre=(0.5, 0.5), deg=1):
    g = Grid(n)
    X, Y = g.coords
    th = deg * np.arctan2(Y - centre[1], X - centre[0])
    z = np.zeros(g.shape)
    return FieldState(g, np.cos(th) / SQRT2, np.sin(th) / SQRT2, z, z.copy())


def test_wrap_range():
    a = np.linspace(-20, 20, 1001)
    w = wrap(a)
    assert np.all(w >= -math.pi) and np.all(w < math.pi)
    assert np.allclose(np.cos(w), np.cos(a)) and np.allclose(np.sin(w), np.sin(a))


def test_uniform_minimiser_has_no_energy():
    g = Grid(20)
    s = FieldState(g, *minimiser(np.full(g.shape, 1.1), C))
    e = discrete_energy(s, C)
    assert e.elastic_q == 0 and e.elastic_m == 0
    assert abs(e.potential) <= 1e-10
    assert e.total == e.elastic_q + e.elastic_m + e.potential


def test_gl_vortex_annulus_energy():
    s = vortex_state(200)
    eq, _, _ = energy_density_cells(s, C)
    t = (np.arange(200) + 0.5) / 200
    Xc, Yc = np.meshgrid(t, t)
    r = np.hypot(Xc - 0.5, Yc - 0.5)
    ring = (r >= 0.1) & (r <= 0.4)
    assert eq[ring].sum() == pytest.approx(math.pi * math.log(4.0), rel=0.02)


def test_split_identity_is_exact():
    rng = np.random.default_rng(0)
    s = initial_condition(Grid(30), 1, P)
    s.m1 += 0.2 * rng.normal(size=s.m1.shape)
    e = discrete_energy(s, C)
    assert e.split_g + e.split_mm + e.split_remainder == pytest.approx(e.total, abs=1e-12 * abs(e.total))
    assert e.as_dict()["total"] == e.total


# ---------------------------------------------------------------- winding


def test_plaquette_winding_of_unit_vortex():
    s = vortex_state(20, centre=(0.52, 0.47))
    w, indet = winding_field(s)
    assert w.sum() == 1 and not indet.any()
    assert w[9, 10] == 1


def test_zero_corners_are_indeterminate():
    s = vortex_state(10)
    s.q11[5, 5] = s.q12[5, 5] = 0.0
    w, indet = winding_field(s)
    assert indet.sum() == 4 and w[indet].sum() == 0


@pytest.mark.parametrize("k", [1, 2])
def test_initial_condition_windings(k):
    s = initial_condition(Grid(40), k, P)
    w, indet = winding_field(s)
    assert w.sum() == 2 * k == boundary_winding(s, "q")
    assert boundary_winding(s, "m") == k


def test_winding_around_singular_centre_node():
    s = initial_condition(Grid(40), 1, P)
    ring = np.arctan2(s.q12, s.q11)[[19, 19, 19, 20, 21, 21, 21, 20], [19, 20, 21, 21, 21, 20, 19, 19]]
    assert loop_winding(ring) == 2


def test_loop_winding_sign():
    t = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    assert loop_winding(t) == 1 and loop_winding(-3 * t) == -3


def test_jacobian_integral_of_initial_condition():
    s = initial_condition(Grid(50), 1, P)
    assert jacobian_integral(s) == pytest.approx(2 * math.pi, rel=0.01)


# ------------------------------------------------------------ eigenframe


def test_frame_decompose_aligned_and_round_trip():
    lam = lambda_star(1.0)
    s = FieldState(Grid(10), *minimiser(np.full((11, 11), 0.7), C))
    u1, u2, ok = frame_decompose(s)
    assert ok.all()
    assert np.allclose(np.abs(u1), C.lambda_eps, atol=1e-12) and np.allclose(u2, 0, atol=1e-12)
    s.m1[:] = lam * np.cos(0.7)
    s.m2[:] = lam * np.sin(0.7)
    u1, u2, _ = frame_decompose(s)
    assert np.allclose(h(u1, u2, 1.0), 0.0, atol=1e-12)


def test_frame_decompose_identities():
    rng = np.random.default_rng(1)
    g = Grid(12)
    s = FieldState(g, *rng.normal(size=(4,) + g.shape))
    u1, u2, ok = frame_decompose(s)
    psi = director_angle(s)
    n = np.stack([np.cos(psi), np.sin(psi)])
    m = np.stack([-np.sin(psi), np.cos(psi)])
    rec = u1 * n + u2 * m
    assert np.allclose(rec[0][ok], s.m1[ok], atol=1e-12) and np.allclose(rec[1][ok], s.m2[ok], atol=1e-12)
    assert np.allclose(np.hypot(u1, u2), s.m_norm, atol=1e-12)
    direct = qmm(s.q11, s.q12, s.m1, s.m2)
    assert np.allclose(s.q_norm / SQRT2 * (u1 ** 2 - u2 ** 2), direct, atol=1e-12)
    # n is the eigenvector of Q for the positive eigenvalue
    Q = s.q_matrix()
    Qn = np.einsum("...ij,j...->i...", Q, n)
    assert np.allclose(Qn, s.q_norm / SQRT2 * n, atol=1e-12)


# --------------------------------------------------------- seeded states


@pytest.fixture(scope="module")
def seeded():
    pts = np.array([[0.3, 0.43], [0.68, 0.57]])
    s = seeded_state(Grid(100), P, pts, minimal_connection(pts))
    return s, pts


def test_defects_of_seeded_state(seeded):
    s, pts = seeded
    ds = charged_defects(detect_defects(s, C))
    assert len(ds) == 2 and ds.total_winding == 2
    for d in ds:
        assert d.q_charge == 0.5
        assert np.min(np.linalg.norm(pts - np.array(d.position), axis=1)) <= s.grid.h
        assert not d.boundary_adjacent


def test_jump_set_of_seeded_state(seeded):
    s, pts = seeded
    js = extract_jump_set(s, consts=C)
    assert len(js) == 1
    comp = js.components[0]
    assert np.max(point_segment_distance(comp.midpoints, pts[0], pts[1])) <= s.grid.h
    L = np.linalg.norm(pts[1] - pts[0])
    # oblique segment: the staircase-corrected length is the relevant estimate
    assert comp.length_corrected == pytest.approx(L, rel=0.15)
    assert comp.length_raw == pytest.approx(comp.length_corrected * 4 / math.pi)


def test_jump_set_of_axis_aligned_seeded_state():
    pts = np.array([[0.2, 0.5], [0.8, 0.5]])
    s = seeded_state(Grid(100), P, pts, minimal_connection(pts))
    js = extract_jump_set(s, consts=C)
    assert len(js) == 1
    comp = js.components[0]
    assert np.max(np.abs(comp.midpoints[:, 1] - 0.5)) <= s.grid.h
    # an axis-aligned jump is counted without staircase: the raw length applies
    assert comp.length_raw == pytest.approx(0.6, rel=0.15)


def test_no_jump_in_initial_condition():
    s = initial_condition(Grid(40), 1, P)
    assert len(extract_jump_set(s, consts=C)) == 0


def test_hausdorff_helper():
    x = np.linspace(0, 1, 101)
    pts = np.column_stack([x, 0.1 * x])
    assert hausdorff_to_segment(pts, (0, 0), (1, 0)) == pytest.approx(0.1, abs=1e-3)
    assert hausdorff_to_segment(pts[:1], (0, 0), (1, 0)) == pytest.approx(1.0, abs=1e-3)


# -------------------------------------------------------- converged state


@pytest.fixture(scope="module")
def converged(flows):
    return flows(0.05)[0].final


def test_converged_invariants(converged):
    s = converged
    w, indet = winding_field(s)
    bd = np.zeros_like(indet)
    bd[0, :] = bd[-1, :] = bd[:, 0] = bd[:, -1] = True
    assert not (indet & bd).any()
    assert w.sum() == boundary_winding(s, "q") == 2
    assert jacobian_integral(s) == pytest.approx(math.pi * w.sum(), rel=0.03)
    e = discrete_energy(s, C)
    assert e.split_g + e.split_mm + e.split_remainder == pytest.approx(e.total, rel=1e-12)


def test_analysis_summary_keys(converged):
    out = analysis_summary(converged, C)
    assert set(out) >= {"energy", "defects", "jump_components", "total_winding"}
    assert out["total_winding"] == 2
    assert [d["charge"] for d in out["defects"]] == [0.5, 0.5]
    assert set(out["jump_components"][0]) == {"length_raw", "length_corrected", "endpoints"}
