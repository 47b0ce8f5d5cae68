import types

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from micpjump import geometry as G
from micpjump import wrench as W
from micpjump.robot import Cell, RobotModel, StanceMode, discretize_cspace, leg_angles, leg_jacobian

NOMINAL = (0.0, 0.18, 0.0)
JF_BOX = ((-0.06, 0.14, -0.1), (0.06, 0.24, 0.1))


def hausdorff_to_points(P, X):
    """Largest distance from a polytope vertex to the nearest point of ``X``."""
    return max(np.linalg.norm(X - v, axis=1).min() for v in P.V)


def torque_ok(f, J, model, tol=1e-9):
    tau = J.T @ f
    return (np.abs(tau).max() <= model.tau_max + tol and f[1] >= -tol
            and abs(f[0]) <= model.mu * f[1] + tol)


def inside(P, X, tol=1e-9):
    return np.max(P.A @ X.T - P.b[:, None]) <= tol


def test_ffp_large_mu_identity_is_square():
    m = types.SimpleNamespace(mu=1e6, tau_max=2.0)
    A, b = W.ffp_rows(np.eye(2), m)
    P = G.hrep_to_vrep(G.ConvexPolytope.from_hrep(A, b))
    square = np.array([[-2, 0], [2, 0], [2, 2], [-2, 2]], float)
    assert np.all(np.abs(P.V[:, 0]) <= 2 + 1e-9) and np.all((P.V[:, 1] >= -1e-9) & (P.V[:, 1] <= 2 + 1e-9))
    assert max(np.linalg.norm(P.V - s, axis=1).min() for s in square) <= 1e-5


def test_ffp_zero_torque_is_point():
    m = types.SimpleNamespace(mu=0.7, tau_max=0.0)
    A, b = W.ffp_rows(np.eye(2), m)
    P = G.hrep_to_vrep(G.ConvexPolytope.from_hrep(A, b))
    assert len(P.V) == 1 and np.allclose(P.V[0], 0)


@pytest.mark.parametrize("leg", ["back", "front"])
def test_ffp_sample_and_hull(leg):
    m = RobotModel()
    P = W.ffp(NOMINAL, leg, m)
    J = leg_jacobian(leg_angles(NOMINAL, leg, m), m)
    ext = np.abs(P.V).max() * 1.2
    g = np.linspace(-ext, ext, 1000)
    X = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    tau = X @ J
    ok = (np.abs(tau).max(axis=1) <= m.tau_max) & (X[:, 1] >= 0) & (np.abs(X[:, 0]) <= m.mu * X[:, 1])
    F = X[ok]
    h = g[1] - g[0]
    # every grid force passing the rows lies in the polytope ...
    assert inside(P, F, 1e-9)
    # ... and every polytope vertex is within a grid cell of a passing force
    assert hausdorff_to_points(P, F) <= 2 * h


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.05, 0.05), st.floats(0.15, 0.22), st.floats(-0.08, 0.08),
       st.sampled_from(["back", "front"]))
def test_fwp_leg_vertices_on_wedge_plane(x, z, th, leg):
    m = RobotModel()
    q = (x, z, th)
    F = W.ffp(q, leg, m)
    P = W.fwp_leg(q, leg, m)
    assert len(P.V) == len(F.V)
    r = W.moment_arm(q, leg, m)
    assert np.abs(P.V[:, 2] - (r[1] * P.V[:, 0] - r[0] * P.V[:, 1])).max() <= 1e-12
    assert len(P.Ae) == 1


def test_wedge_zero_arm():
    assert W.wedge([0.0, 0.0], [3.0, -4.0]) == 0.0


def test_fwp_config_mirror_symmetric():
    # symmetric only when the knees mirror each other as well
    m = RobotModel(knee_branch=("back", "forward"))
    P = W.fwp_config(NOMINAL, m)
    assert inside(P, P.V * np.array([-1, 1, -1]), 1e-7)


def test_fwp_config_contains_weight_and_origin():
    m = RobotModel()
    P = W.fwp_config(NOMINAL, m)
    assert G.contains(P, [0.0, m.m * m.g, 0.0])
    assert G.contains(P, [0.0, 0.0, 0.0])


def test_fwp_config_requires_double_stance():
    with pytest.raises(W.WrenchError):
        W.fwp_config((0.0, 0.5, 0.0), RobotModel())


def test_fwp_config_contains_each_leg():
    m = RobotModel()
    P = W.fwp_config(NOMINAL, m)
    for leg in ("back", "front"):
        assert inside(P, W.fwp_leg(NOMINAL, leg, m).V, 1e-9)


@pytest.mark.parametrize("mu", [0.7, 1e6])
def test_ffp_positive_homogeneity(mu):
    m1 = RobotModel(mu=mu)
    m2 = RobotModel(mu=mu, tau_max=2 * m1.tau_max)
    a = W.ffp(NOMINAL, "front", m1).V
    b = W.ffp(NOMINAL, "front", m2).V
    assert all(np.abs(b - 2 * v).max(axis=1).min() <= 1e-9 for v in a)


def test_degenerate_cell_equals_config():
    m = RobotModel()
    V = np.tile(NOMINAL, (4, 1))
    c = Cell(1, V, StanceMode.DOUBLE, G.hull([NOMINAL]))
    P = W.fwp_cell(c, m)
    Q = W.fwp_config(NOMINAL, m)
    assert len(P.V) == len(Q.V)
    assert all(np.abs(Q.V - v).max(axis=1).min() <= 1e-7 for v in P.V)


def random_in(P, n, rng):
    return rng.dirichlet(np.ones(len(P.V)), size=n) @ P.V


@pytest.fixture(scope="module")
def jf_cells():
    m = RobotModel(q_min=JF_BOX[0], q_max=JF_BOX[1])
    return m, W.cached_fwps(discretize_cspace(m, {"double": 21}, grid=(2, 2, 1)), m)


def test_cell_fwp_achievable_at_every_vertex(jf_cells):
    m, cells = jf_cells
    rng = np.random.default_rng(0)
    for c in cells[:5]:
        for F in random_in(c.fwp, 40, rng):
            for v in c.vertices:
                forces, tau = W.decompose_wrench(F, v, m)
                assert tau <= m.tau_max + 1e-6
                # independent re-check of the returned split
                for leg, f in forces.items():
                    J = leg_jacobian(leg_angles(v, leg, m), m)
                    assert torque_ok(f, J, m, 1e-6)
                tot = sum(forces.values())
                mom = sum(W.wedge(W.moment_arm(v, leg, m), f) for leg, f in forces.items())
                assert np.allclose(np.r_[tot, mom], F, atol=1e-6)


def test_cell_fwp_inside_each_vertex_fwp(jf_cells):
    m, cells = jf_cells
    c = cells[0]
    for v in c.vertices:
        assert inside(W.fwp_config(v, m), c.fwp.V, 1e-7)


def test_single_stance_cell_on_plane():
    m = RobotModel(q_min=(-0.12, 0.13, -0.3), q_max=(0.12, 0.25, 0.3))
    cells = discretize_cspace(m, {"front": 2})
    rng = np.random.default_rng(1)
    for c in cells:
        P = W.fwp_cell(c, m)
        center, _ = G.chebyshev_center(c.geo)
        r = W.moment_arm(center, "front", m)
        X = random_in(P, 200, rng)
        assert np.abs(X[:, 2] - (r[1] * X[:, 0] - r[0] * X[:, 1])).max() <= 1e-9


def test_cache_round_trip(tmp_path, jf_cells):
    m, cells = jf_cells
    bare = [Cell(c.id, c.vertices, c.mode, c.geo) for c in cells[:3]]
    first = W.cached_fwps(bare, m, tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1 and files[0].name.startswith("fwp-")
    again = W.cached_fwps(bare, m, tmp_path)
    for a, b in zip(first, again):
        assert np.array_equal(a.fwp.A, b.fwp.A) and np.array_equal(a.fwp.V, b.fwp.V)
    assert files[0].read_text().startswith("FWP 1 double\n")
