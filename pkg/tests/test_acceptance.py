"""End-to-end acceptance checks.

Each test records one PASS/FAIL line, printed in the terminal summary.  Run
directly with ``python3 tests/test_acceptance.py`` or through pytest.
"""
import contextlib
import itertools
import sys
import time

import numpy as np
import pytest

from micpjump import bezier as B
from micpjump import geometry as G
from micpjump import solve as S
from micpjump import transcribe as tr
from micpjump import verify as V
from micpjump import wrench as W
from micpjump.robot import StanceMode, leg_angles, leg_jacobian

from conftest import ACCEPTANCE, PLAN_SECONDS, load_scenario
from oracles import (bezier_value, hull_vertices_bruteforce, in_hull_lp, milp_enumeration,
                     quad_double_integral, vertices_pairwise_2d)

FORWARD = np.array([[0.0, -7.6, 33.8, -33.7, 90.1, 0.0],
                    [25.1, -69.0, 152.0, -50.0, 262.7, 0.0],
                    [0.0, 5.5, -25.3, 25.5, -5.8, 0.0]]).T


@contextlib.contextmanager
def criterion(n, title):
    note = {"detail": ""}
    try:
        yield note
    except BaseException as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        ACCEPTANCE[n] = (False, f"{title}: {msg}")
        print(f"criterion {n}: FAIL  {title}: {msg}")
        raise
    ACCEPTANCE[n] = (True, f"{title}: {note['detail']}")
    print(f"criterion {n}: PASS  {title}: {note['detail']}")


def same_rows(X, Y, tol):
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    return X.shape == Y.shape and all(np.abs(Y - x).max(axis=1).min() <= tol for x in X)


# 1 ---------------------------------------------------------------------------

def test_c1_static_start_wrench(forward_plan):
    with criterion(1, "static-start f_z(0) = m g") as note:
        sf, _, out = forward_plan
        assert out.plan is not None, "no plan"
        mg = sf.robot.m * sf.robot.g
        fz0 = float(B.BezierCurve(out.plan.jumps[0].alpha_F, out.plan.T_st)(0.0)[1])
        rel = abs(fz0 - mg) / mg
        note["detail"] = f"f_z(0)={fz0:.4f} N, m g={mg:.4f} N, rel err {rel:.2e}"
        assert rel <= 0.01, note["detail"]


# 2 ---------------------------------------------------------------------------

def test_c2_binary_count_parity(jump_forward):
    with criterion(2, "B_cs and stance block sizes") as note:
        sf, cells = jump_forward
        n_double = sum(c.mode == StanceMode.DOUBLE for c in cells)
        model = tr.build(sf.scenario, sf.robot, cells)
        cols = np.asarray(model.roles["B_cs"][1])
        n_cs = cols.size
        n_stance = len(tr.stance_block(model))
        note["detail"] = (f"{n_double} double cells, N_t={sf.scenario.N_t}: "
                          f"B_cs={n_cs}, stance={n_stance}")
        assert n_double == 21 and sf.scenario.N_t == 9
        assert n_cs == 189 and n_stance == 27, note["detail"]
        assert np.all(model.binary[cols.ravel()])


# 3 ---------------------------------------------------------------------------

def test_c3_jump_forward_feasible(forward_plan):
    with criterion(3, "jump-forward solve and verify") as note:
        sf, cells, out = forward_plan
        secs = PLAN_SECONDS[("jump_forward", "external")]
        assert out.relaxed_result.status == "optimal", out.relaxed_result.status
        assert out.plan is not None and out.plan.status in ("optimal", "feasible")
        rep = V.audit(out.plan, sf.robot, cells, sf.scenario)
        worst = {k: rep[k].worst for k in ("geo", "fwp", "partition", "ballistic")}
        note["detail"] = (f"status {out.plan.status} ({out.refined or 'relaxed'}), "
                          + ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
                          + f", {secs:.1f} s external")
        assert max(worst["geo"], worst["fwp"], worst["partition"]) <= 1e-6, note["detail"]
        assert worst["ballistic"] <= 0.02, note["detail"]
        assert rep.passed, rep.to_text()
        assert secs <= 60.0, note["detail"]


# 4 ---------------------------------------------------------------------------

def test_c4_parkour_stepping_stone(parkour_plan):
    with criterion(4, "parkour foothold choice") as note:
        sf, _, out = parkour_plan
        assert out.plan is not None, "no plan"
        Bfp = np.rint(out.result.x[out.model.roles["B_fp"]]).astype(int)
        picked = [int(np.argmax(Bfp[:, j])) for j in range(Bfp.shape[1])]
        note["detail"] = f"B_fp columns pick segments {[p + 1 for p in picked]} (1-based)"
        assert Bfp.sum(axis=0).tolist() == [1, 1]
        assert picked == [1, 2], note["detail"]
        assert [jr.segment for jr in out.plan.jumps] == [1, 2]


# 5 ---------------------------------------------------------------------------

def test_c5_bezier_operator(robot):
    with criterion(5, "double integration vs quadrature") as note:
        rng = np.random.default_rng(5)
        Dinv = np.linalg.inv(robot.D)
        worst = 0.0
        for _ in range(100):
            aF = rng.normal(scale=50.0, size=(6, 3))
            q0, qd0 = rng.normal(size=3), rng.normal(size=3)
            T = rng.uniform(0.1, 0.4)
            a_qd, a_q = B.stance_coefficients(aF, q0, qd0, T, robot.D, robot.a_g)
            for ch in range(3):
                f = lambda t, ch=ch: Dinv[ch, ch] * bezier_value(aF[:, ch], T, t) + robot.a_g[ch]
                q, qd = quad_double_integral(f, T, q0[ch], qd0[ch])
                worst = max(worst, abs(a_q[-1, ch] - q), abs(a_qd[-1, ch] - qd))
        c = B.BezierCurve(FORWARD, 0.2)
        ends = (float(c(0.0)[1]), float(c(0.2)[1]))
        note["detail"] = f"max endpoint error {worst:.1e}; f_z(0)={ends[0]}, f_z(T)={ends[1]}"
        assert worst <= 1e-8, note["detail"]
        assert ends == (25.1, 0.0), note["detail"]


# 6 ---------------------------------------------------------------------------

def _random_hrep_2d(rng):
    k = rng.integers(3, 9)
    ang = np.sort(rng.uniform(0, 2 * np.pi, k))
    # keep every gap below pi so the set is bounded
    ang = np.concatenate([ang, ang[:1] + np.pi * np.array([0.5, 1.0, 1.5])])
    A = np.c_[np.cos(ang), np.sin(ang)]
    return A, rng.uniform(0.5, 2.0, len(A))


def _insphere(T):
    faces = [np.delete(T, i, axis=0) for i in range(4)]
    area = np.array([0.5 * np.linalg.norm(np.cross(f[1] - f[0], f[2] - f[0])) for f in faces])
    vol = abs(np.linalg.det(T[1:] - T[0])) / 6.0
    return area @ T / area.sum(), 3.0 * vol / area.sum()


def test_c6_geometry_oracles():
    with criterion(6, "geometry vs brute-force oracles") as note:
        rng = np.random.default_rng(6)
        tol = 1e-7
        t0 = time.perf_counter()
        bad = {}

        def miss(op):
            bad[op] = bad.get(op, 0) + 1

        for k in range(200):
            dim = 2 if k % 2 == 0 else 3
            P = rng.normal(size=(12, dim))
            if not same_rows(G.hull(P).V, P[hull_vertices_bruteforce(P)], tol):
                miss("hull")

        for _ in range(200):
            A, b = _random_hrep_2d(rng)
            got = G.hrep_to_vrep(G.ConvexPolytope.from_hrep(A, b)).V
            if not same_rows(got, vertices_pairwise_2d(A, b), tol):
                miss("h->v")

        for k in range(200):
            dim = 2 if k % 2 == 0 else 3
            P = rng.normal(size=(10, dim))
            H = G.vrep_to_hrep(G.ConvexPolytope(dim, V=P))
            slack = H.b[:, None] - H.A @ P.T
            tight = (np.abs(slack) <= tol).sum(axis=1)
            # containment of every input point and a supporting facet per row
            if slack.min() < -tol or np.any(tight < dim):
                miss("v->h")

        dirs = np.c_[np.cos(np.linspace(0, 2 * np.pi, 361)), np.sin(np.linspace(0, 2 * np.pi, 361))]
        for _ in range(200):
            a, b = rng.normal(size=(5, 2)), rng.normal(size=(4, 2)) + 1.0
            S_ = G.minkowski_sum(G.hull(a), G.hull(b))
            h_sum = (dirs @ a.T).max(axis=1) + (dirs @ b.T).max(axis=1)
            h_got = (dirs @ S_.V.T).max(axis=1)
            extreme = len(hull_vertices_bruteforce(S_.V)) == len(S_.V)
            if np.abs(h_sum - h_got).max() > tol or not extreme:
                miss("minkowski")

        for _ in range(200):
            while True:
                T = rng.uniform(-1, 1, size=(4, 3))
                if abs(np.linalg.det(T[1:] - T[0])) > 0.05:
                    break
            x, r = G.chebyshev_center(G.vrep_to_hrep(G.ConvexPolytope(3, V=T)))
            xo, ro = _insphere(T)
            if abs(r - ro) > tol or np.abs(x - xo).max() > tol:
                miss("chebyshev")

        for _ in range(200):
            P = rng.normal(size=(10, 3))
            poly = G.vrep_to_hrep(G.ConvexPolytope(3, V=P))
            for x in rng.uniform(-1.5, 1.5, size=(5, 3)):
                if G.contains(poly, x, tol) != in_hull_lp(P, x):
                    miss("contains")

        secs = time.perf_counter() - t0
        note["detail"] = f"6 ops x 200 instances, mismatches {bad or 0}, {secs:.1f} s"
        assert not bad, note["detail"]
        assert secs < 60.0, note["detail"]


# 7 ---------------------------------------------------------------------------

def test_c7_fwp_vertex_guarantee():
    with criterion(7, "cell FWP achievable at every vertex") as note:
        rng = np.random.default_rng(7)
        n_cells = n_checks = 0
        worst = 0.0
        for name in ("jump_forward", "jump_backward", "parkour"):
            sf, cells = load_scenario(name)
            m = sf.robot
            for c in cells:
                if c.mode != StanceMode.DOUBLE:
                    continue
                n_cells += 1
                Fs = rng.dirichlet(np.ones(len(c.fwp.V)), size=100) @ c.fwp.V
                for v in c.vertices:
                    Js = {leg: leg_jacobian(leg_angles(v, leg, m), m) for leg in W.LEGS}
                    for F in Fs:
                        forces, _ = W.decompose_wrench(F, v, m)
                        assert forces is not None, f"{name} cell {c.id}: no split at {v}"
                        # torques recomputed from the split, not taken from the LP
                        tau = max(np.abs(Js[leg].T @ f).max() for leg, f in forces.items())
                        for f in forces.values():
                            assert f[1] >= -1e-6 and abs(f[0]) <= m.mu * f[1] + 1e-6
                        tot = sum(forces.values())
                        mom = sum(W.wedge(W.moment_arm(v, leg, m), f) for leg, f in forces.items())
                        assert np.abs(np.r_[tot, mom] - F).max() <= 1e-6
                        worst = max(worst, tau)
                        n_checks += 1
        note["detail"] = f"{n_cells} cells, {n_checks} splits, max |tau| {worst:.6f} N m"
        assert worst <= 9.8 + 1e-6, note["detail"]


# 8 ---------------------------------------------------------------------------

def _pure_binary_optimum(c, A, b):
    n = len(c)
    X = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    ok = np.all(X @ A.T <= b + 1e-9, axis=1)
    return float((X[ok] @ c).min()) if ok.any() else None


def test_c8_solver_correctness():
    with criterion(8, "branch and bound vs enumeration") as note:
        rng = np.random.default_rng(8)
        worst = 0.0
        for k in range(50):
            if k < 35:
                n, nc = int(rng.integers(4, 13)), 0
            else:
                n, nc = int(rng.integers(2, 7)), int(rng.integers(1, 4))
            m = int(rng.integers(2, 7))
            A = rng.integers(-5, 6, size=(m, n + nc)).astype(float)
            x0 = np.r_[rng.integers(0, 2, n), rng.uniform(0, 3, nc)]
            b = A @ x0 + rng.uniform(0, 2, m)
            c = rng.integers(-10, 11, n + nc).astype(float)
            lb, ub = np.zeros(n + nc), np.r_[np.ones(n), np.full(nc, 4.0)]
            binary = np.r_[np.ones(n, bool), np.zeros(nc, bool)]
            model = tr.MicpModel.from_arrays(c, A, "L" * m, b, lb, ub, binary)
            r = S.solve_milp(model)
            want = (_pure_binary_optimum(c, A, b) if nc == 0
                    else milp_enumeration(c, A, b, None, None, lb, ub, binary)[0])
            assert r.status == "optimal", f"instance {k}: {r.status}"
            worst = max(worst, abs(r.objective - want))
        infeasible = [
            # parity: 2 x1 + 2 x2 = 1 has LP solutions but no binary one
            tr.MicpModel.from_arrays([1, 1], np.array([[2.0, 2.0]]), "E", [1.0], [0, 0], [1, 1],
                                     [True, True]),
            # cardinality: pick at least 4 of 3
            tr.MicpModel.from_arrays([0, 0, 0], np.array([[-1.0, -1.0, -1.0]]), "L", [-4.0],
                                     [0] * 3, [1] * 3, [True] * 3),
            # odd cycle packing with a covering demand
            tr.MicpModel.from_arrays([0] * 3, np.array([[1.0, 1, 0], [0, 1, 1], [1, 0, 1],
                                                        [-1, -1, -1]]), "LLLL",
                                     [1, 1, 1, -1.5], [0] * 3, [1] * 3, [True] * 3),
        ]
        certs = []
        for mdl in infeasible:
            r = S.solve_milp(mdl)
            certs.append(r.status == "infeasible" and r.x is None and r.bound == np.inf)
        note["detail"] = (f"50 instances, max objective error {worst:.1e}; "
                          f"{sum(certs)}/{len(certs)} infeasible cases certified")
        assert worst <= 1e-6 and all(certs), note["detail"]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
