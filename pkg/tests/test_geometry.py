import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from micpjump import geometry as G

from oracles import chebyshev_grid, hull_vertices_bruteforce, in_hull_lp, vertices_pairwise_2d


def same_rows(X, Y, tol=1e-9):
    X, Y = np.asarray(X), np.asarray(Y)
    if X.shape != Y.shape:
        return False
    return all(np.abs(Y - x).max(axis=1).min() <= tol for x in X)


def square(lo=0.0, hi=1.0):
    return G.ConvexPolytope.from_hrep([[1, 0], [-1, 0], [0, 1], [0, -1]], [hi, -lo, hi, -lo])


def rotated_box(rng, dim=2):
    R, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    h = rng.uniform(0.3, 1.0, dim)
    c = rng.uniform(-0.5, 0.5, dim)
    A = np.vstack([R.T, -R.T])
    b = np.concatenate([h + R.T @ c, h - R.T @ c])
    return G.ConvexPolytope.from_hrep(A, b)


# --- hull -------------------------------------------------------------------

def test_hull_drops_interior_point():
    P = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]
    h = G.hull(P)
    assert len(h.V) == 4
    assert not any(np.allclose(v, [0.5, 0.5]) for v in h.V)


def test_hull_single_point_is_pinned():
    h = G.hull([[0.3, -2.0, 1.0]])
    assert len(h.V) == 1 and h.affine_dim == 0
    assert np.linalg.matrix_rank(h.Ae) == 3
    assert np.allclose(np.linalg.solve(h.Ae, h.be), [0.3, -2.0, 1.0])


def test_hull_rejects_nonfinite():
    with pytest.raises(G.GeometryError):
        G.hull([[0, 0], [np.nan, 1]])


def test_hull_collinear_is_segment():
    h = G.vrep_to_hrep(G.hull([[0, 0], [1, 1], [2, 2], [0.5, 0.5]]))
    assert h.affine_dim == 1
    assert same_rows(h.V, [[0, 0], [2, 2]])
    assert len(h.Ae) == 1


@pytest.mark.parametrize("seed", range(5))
def test_hull_matches_bruteforce_2d(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(50, 2))
    keep = hull_vertices_bruteforce(P)
    assert same_rows(G.hull(P).V, P[keep])


# --- representation conversions ---------------------------------------------

def test_triangle_hrep():
    h = G.vrep_to_hrep(G.hull([[0, 0], [1, 0], [0, 1]]))
    rows = {tuple(np.round(np.r_[a, b] / np.abs(a).max(), 9)) for a, b in zip(h.A, h.b)}
    assert rows == {(-1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (1.0, 1.0, 1.0)}


def test_planar_quadrilateral_in_3d():
    V = [[0, 0, 0], [1, 0, 0.5], [1, 1, 1.5], [0, 1, 1.0]]
    h = G.vrep_to_hrep(G.ConvexPolytope(3, V=V))
    assert len(h.Ae) == 1 and len(h.A) == 4


@pytest.mark.parametrize("seed", range(5))
def test_vrep_to_hrep_contains_cloud(seed):
    P = np.random.default_rng(seed).normal(size=(40, 3))
    h = G.vrep_to_hrep(G.ConvexPolytope(3, V=P))
    assert np.max(h.A @ P.T - h.b[:, None]) <= 1e-9


def test_unit_cube_vertices():
    A = np.vstack([np.eye(3), -np.eye(3)])
    b = np.r_[np.ones(3), np.zeros(3)]
    v = G.hrep_to_vrep(G.ConvexPolytope.from_hrep(A, b))
    assert len(v.V) == 8
    assert same_rows(v.V, np.array(list(np.ndindex(2, 2, 2)), float))


def test_infeasible_hrep_is_empty():
    v = G.hrep_to_vrep(G.ConvexPolytope.from_hrep([[1.0], [-1.0]], [0.0, -1.0]))
    assert v.empty


def test_unbounded_hrep_raises():
    with pytest.raises(G.UnboundedPolytopeError):
        G.hrep_to_vrep(G.ConvexPolytope.from_hrep([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0]))


@pytest.mark.parametrize("seed", range(10))
def test_hrep_to_vrep_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(3, 9)
    ang = np.sort(rng.uniform(0, 2 * np.pi, m))
    A = np.column_stack([np.cos(ang), np.sin(ang)])
    b = rng.uniform(0.5, 1.5, m)
    A = np.vstack([A, np.eye(2), -np.eye(2)])   # keep it bounded
    b = np.r_[b, 3, 3, 3, 3]
    got = G.hrep_to_vrep(G.ConvexPolytope.from_hrep(A, b)).V
    assert same_rows(got, vertices_pairwise_2d(A, b), 1e-7)


# --- Minkowski sums -----------------------------------------------------------

def test_minkowski_squares():
    s = G.minkowski_sum(G.hull([[0, 0], [1, 0], [1, 1], [0, 1]]),
                        G.hull([[0, 0], [1, 0], [1, 1], [0, 1]]))
    assert same_rows(s.V, [[0, 0], [2, 0], [2, 2], [0, 2]])


def test_minkowski_identity():
    P = G.hull(np.random.default_rng(1).normal(size=(8, 2)))
    s = G.minkowski_sum(P, G.hull([[0.0, 0.0]]))
    assert same_rows(s.V, P.V)


def test_minkowski_dimension_mismatch():
    with pytest.raises(G.GeometryError):
        G.minkowski_sum(G.hull([[0, 0]]), G.hull([[0, 0, 0]]))


def _dense_boundary(V, n=60):
    V = np.asarray(V)
    t = np.linspace(0, 1, n, endpoint=False)[:, None]
    return np.vstack([V[i] + t * (V[(i + 1) % len(V)] - V[i]) for i in range(len(V))])


@pytest.mark.parametrize("seed", range(5))
def test_minkowski_sampling_oracle(seed):
    rng = np.random.default_rng(seed)
    T1, T2 = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    S = G.minkowski_sum(G.hull(T1), G.hull(T2))
    samples = (_dense_boundary(T1)[:, None, :] + _dense_boundary(T2)[None, :, :]).reshape(-1, 2)
    keep = hull_vertices_bruteforce(G.hull(samples).V)
    assert same_rows(S.V, G.hull(samples).V[keep], 1e-9)
    # every sample sum is inside the result
    assert np.max(S.A @ samples.T - S.b[:, None]) <= 1e-9


# --- intersections, containment, redundancy -----------------------------------

def test_intersect_idempotent():
    P = square()
    Q = G.intersect([P, P])
    assert same_rows(G.hrep_to_vrep(Q).V, G.hrep_to_vrep(P).V)
    assert len(Q.A) == 4


def test_intersect_disjoint_is_empty():
    assert G.intersect([square(0, 1), square(2, 3)]).empty


@pytest.mark.parametrize("seed", range(3))
def test_intersect_pointwise_oracle(seed):
    rng = np.random.default_rng(seed)
    boxes = [rotated_box(rng) for _ in range(4)]
    I = G.intersect(boxes)
    X = rng.uniform(-1.5, 1.5, size=(1000, 2))
    for x in X:
        want = all(np.all(B.A @ x <= B.b + 1e-9) for B in boxes)
        assert (not I.empty and G.contains(I, x, 1e-9)) == want


def test_contains_boundary_and_outside():
    P = square()
    assert G.contains(P, [1, 1], 1e-9)
    assert not G.contains(P, [1 + 2e-9, 0.5], 1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_contains_vs_lp_membership(seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(7, 3))
    P = G.vrep_to_hrep(G.ConvexPolytope(3, V=V))
    for x in rng.normal(size=(300, 3)) * 0.8:
        assert G.contains(P, x, 1e-9) == in_hull_lp(P.V, x, 1e-9)


def test_remove_redundant_duplicate_and_slack():
    A = [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 0], [1, 0]]
    b = [1, 0, 1, 0, 1, 5]
    P = G.remove_redundant(G.ConvexPolytope.from_hrep(A, b))
    assert len(P.A) == 4
    assert np.allclose(P.A[0], [1, 0])   # earlier copy kept


@pytest.mark.parametrize("seed", range(3))
def test_remove_redundant_pointwise(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(15, 2))
    b = rng.uniform(0.5, 2.0, 15)
    P = G.ConvexPolytope.from_hrep(A, b)
    R = G.remove_redundant(P)
    assert len(R.A) <= len(A)
    for x in rng.uniform(-3, 3, size=(1000, 2)):
        assert np.all(A @ x <= b + 1e-9) == np.all(R.A @ x <= R.b + 1e-9)


# --- Chebyshev centers ----------------------------------------------------------

def test_chebyshev_square():
    c, r = G.chebyshev_center(square())
    assert np.allclose(c, [0.5, 0.5]) and r == pytest.approx(0.5)


def test_chebyshev_345_triangle():
    _, r = G.chebyshev_center(G.hull([[0, 0], [3, 0], [0, 4]]))
    assert r == pytest.approx(1.0)


def test_chebyshev_empty_raises():
    with pytest.raises(G.EmptyPolytopeError):
        G.chebyshev_center(G.ConvexPolytope.empty_set(2))


@pytest.mark.parametrize("seed", range(3))
def test_chebyshev_grid_oracle(seed):
    V = np.random.default_rng(seed).normal(size=(4, 3))
    P = G.vrep_to_hrep(G.ConvexPolytope(3, V=V))
    c, r = G.chebyshev_center(P)
    assert np.all(P.A @ c + r <= P.b + 1e-9)
    _, r_grid = chebyshev_grid(P.A, P.b, V.min(0), V.max(0), n=25, refine=6)
    assert r == pytest.approx(r_grid, abs=1e-4)
    assert r >= r_grid - 1e-9


def test_dump_round_trip():
    P = G.vrep_to_hrep(G.ConvexPolytope(3, V=[[0, 0, 0], [1, 0, 0.5], [1, 1, 1.5], [0, 1, 1.0]]))
    Q = G.loads(G.dumps(P), 3)
    assert np.array_equal(P.A, Q.A) and np.array_equal(P.Ae, Q.Ae) and np.array_equal(P.V, Q.V)


# --- properties -------------------------------------------------------------------

coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
pts2 = st.lists(st.tuples(coord, coord), min_size=3, max_size=12)


@settings(max_examples=60, deadline=None)
@given(pts2)
def test_round_trip_recovers_vertices(points):
    P = np.array(points)
    h = G.vrep_to_hrep(G.hull(P))
    if h.affine_dim < 2:
        return
    back = G.hrep_to_vrep(G.ConvexPolytope.from_hrep(h.A, h.b))
    assert same_rows(back.V, h.V, 1e-9 * max(1.0, np.abs(P).max()))


tri = st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=3, max_size=3)


@settings(max_examples=40, deadline=None)
@given(tri, tri, tri)
def test_minkowski_commutative_associative(a, b, c):
    A, B, C = (G.hull(np.array(t)) for t in (a, b, c))
    ab, ba = G.minkowski_sum(A, B), G.minkowski_sum(B, A)
    assert same_rows(ab.V, ba.V, 1e-8)
    left = G.minkowski_sum(ab, C)
    right = G.minkowski_sum(A, G.minkowski_sum(B, C))
    assert same_rows(left.V, right.V, 1e-8)


box = st.tuples(st.floats(0.1, 2), st.floats(0.1, 2), st.floats(-1, 1), st.floats(-1, 1))


@settings(max_examples=60, deadline=None)
@given(box, st.floats(0, 1), st.floats(0, 1))
def test_chebyshev_radius_monotone(bx, sx, sy):
    w, h, cx, cy = bx
    outer = G.ConvexPolytope.from_hrep([[1, 0], [-1, 0], [0, 1], [0, -1]],
                                       [cx + w, w - cx, cy + h, h - cy])
    # a sub-box scaled by (sx, sy) placed inside
    iw, ih = w * max(sx, 0.01), h * max(sy, 0.01)
    inner = G.ConvexPolytope.from_hrep([[1, 0], [-1, 0], [0, 1], [0, -1]],
                                       [cx + iw, iw - cx, cy + ih, ih - cy])
    assert G.chebyshev_center(inner)[1] <= G.chebyshev_center(outer)[1] + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_contains_agrees_with_lp(seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(6, 2))
    P = G.vrep_to_hrep(G.hull(V))
    x = rng.normal(size=2)
    assert G.contains(P, x, 1e-9) == in_hull_lp(P.V, x, 1e-9)
