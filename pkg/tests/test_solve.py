import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from micpjump import solve as S
from micpjump.transcribe import MicpModel

from oracles import lp_vertex_enumeration, milp_enumeration


def model_from(c, A_ub, b_ub, lb, ub, binary, A_eq=None, b_eq=None):
    A = np.vstack([A_ub] + ([A_eq] if A_eq is not None else []))
    sense = "L" * len(A_ub) + ("E" * len(A_eq) if A_eq is not None else "")
    rhs = np.concatenate([b_ub] + ([b_eq] if A_eq is not None else []))
    return MicpModel.from_arrays(c, A, sense, rhs, lb, ub, binary)


def random_milp(rng, n_bin, n_cont, m, feasible=True):
    n = n_bin + n_cont
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    x0 = np.r_[rng.integers(0, 2, n_bin), rng.uniform(0, 3, n_cont)]
    slack = rng.uniform(0, 2, m)
    b = A @ x0 + slack if feasible else A @ x0 - 50
    c = rng.integers(-10, 11, n).astype(float)
    lb = np.zeros(n)
    ub = np.r_[np.ones(n_bin), np.full(n_cont, 4.0)]
    binary = np.r_[np.ones(n_bin, bool), np.zeros(n_cont, bool)]
    return c, A, b, lb, ub, binary


# --- LP -------------------------------------------------------------------------

def test_lp_small_max():
    r = S.solve_lp([-1, -1], A_ub=[[1, 0], [0, 1]], b_ub=[1, 1])
    assert r.status == "optimal" and -r.value == pytest.approx(2)
    assert np.allclose(r.x, [1, 1])


def test_lp_infeasible_pair():
    r = S.solve_lp([1.0], A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0])
    assert r.status == "infeasible"


def test_lp_unbounded():
    r = S.solve_lp([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])
    assert r.status == "unbounded"


def test_lp_equalities_and_free_bounds():
    r = S.solve_lp([1, 2], A_eq=[[1, 1]], b_eq=[1], lb=[-5, -5], ub=[5, 5])
    assert r.value == pytest.approx(-3.0)
    assert np.allclose(r.x, [5, -4])


@pytest.mark.parametrize("seed", range(40))
def test_lp_vertex_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 8))
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m) + 1.0
    c = rng.normal(size=n)
    lb, ub = -rng.uniform(0, 2, n), rng.uniform(0.5, 2, n)
    want, _ = lp_vertex_enumeration(c, A, b, lb, ub)
    r = S.solve_lp(c, A_ub=A, b_ub=b, lb=lb, ub=ub)
    if math.isinf(want):
        assert r.status == "infeasible"
    else:
        assert r.status == "optimal"
        assert r.value == pytest.approx(want, abs=1e-7)


def test_lp_degenerate_cycling_example():
    # classic Beale example: cycles under Dantzig pricing without a safeguard
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    r = S.solve_lp(c, A_ub=A, b_ub=[0, 0, 1])
    assert r.status == "optimal" and r.value == pytest.approx(-0.05)


# --- branch and bound -------------------------------------------------------------

def knapsack(seed):
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 20, 8).astype(float)
    v = rng.integers(1, 30, 8).astype(float)
    cap = float(w.sum() // 2)
    return w, v, cap


@pytest.mark.parametrize("seed", range(5))
def test_knapsack_matches_enumeration(seed):
    w, v, cap = knapsack(seed)
    best = max(v @ np.array(bits) for bits in np.ndindex(*(2,) * 8)
               if w @ np.array(bits) <= cap)
    model = model_from(-v, w[None, :], [cap], np.zeros(8), np.ones(8), np.ones(8, bool))
    r = S.solve_milp(model)
    assert r.status == "optimal"
    assert -r.objective == pytest.approx(best)


def test_integral_root_needs_no_nodes():
    model = model_from([1.0, 1.0], [[-1.0, 0.0], [0.0, -1.0]], [-1.0, 0.0], [0, 0], [1, 1],
                       [True, True])
    r = S.solve_milp(model)
    assert r.status == "optimal" and r.nodes == 0
    assert np.allclose(r.x, [1, 0])


def test_contradictory_sum_row_is_infeasible():
    # one-of-three row forced to zero while each binary must be one
    A_eq = np.array([[1.0, 1.0, 1.0]])
    model = model_from(np.zeros(3), -np.eye(3)[:1], [-1.0], np.zeros(3), np.ones(3),
                       np.ones(3, bool), A_eq=A_eq, b_eq=[0.0])
    r = S.solve_milp(model)
    assert r.status == "infeasible" and not r.has_solution


@pytest.mark.parametrize("seed", range(15))
def test_random_milp_matches_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    c, A, b, lb, ub, binary = random_milp(rng, int(rng.integers(3, 9)), int(rng.integers(1, 4)),
                                          int(rng.integers(2, 6)))
    want, _ = milp_enumeration(c, A, b, None, None, lb, ub, binary)
    r = S.solve_milp(model_from(c, A, b, lb, ub, binary), S.SolverParams(gap=0))
    assert r.status == "optimal"
    assert r.objective == pytest.approx(want, abs=1e-6)
    assert r.gap <= 1e-9 or r.objective == r.bound


def test_incumbent_satisfies_rows():
    rng = np.random.default_rng(7)
    c, A, b, lb, ub, binary = random_milp(rng, 8, 3, 5)
    model = model_from(c, A, b, lb, ub, binary)
    r = S.solve_milp(model)
    assert model.max_violation(r.x) <= 1e-6
    assert np.abs(r.x[binary] - np.round(r.x[binary])).max() <= 1e-6


def test_bound_monotone_and_below_incumbent():
    rng = np.random.default_rng(11)
    c, A, b, lb, ub, binary = random_milp(rng, 12, 3, 6)
    model = model_from(c, A, b, lb, ub, binary)
    r = S.solve_milp(model, S.SolverParams(gap=0, batch=1))
    trace = r.stats["trace"]
    assert trace
    bounds = [t[1] for t in trace]
    assert all(b1 <= b2 + 1e-9 for b1, b2 in zip(bounds, bounds[1:]))
    assert all(bd <= inc + 1e-9 for _, bd, inc in trace)


def test_deterministic_across_runs_and_threads():
    rng = np.random.default_rng(5)
    c, A, b, lb, ub, binary = random_milp(rng, 12, 2, 6)
    model = model_from(c, A, b, lb, ub, binary)
    a = S.solve_milp(model, S.SolverParams(gap=0))
    b_ = S.solve_milp(model, S.SolverParams(gap=0))
    t = S.solve_milp(model, S.SolverParams(gap=0, threads=3))
    assert a.nodes == b_.nodes == t.nodes
    assert np.array_equal(a.x, b_.x) and np.array_equal(a.x, t.x)


def test_node_limit_reports_gap():
    rng = np.random.default_rng(9)
    c, A, b, lb, ub, binary = random_milp(rng, 14, 2, 8)
    r = S.solve_milp(model_from(c, A, b, lb, ub, binary), S.SolverParams(gap=0, node_limit=1))
    assert r.status in ("node-limit", "optimal")
    if r.status == "node-limit":
        assert r.bound <= r.objective


def test_highs_engine_agrees_with_simplex():
    rng = np.random.default_rng(21)
    c, A, b, lb, ub, binary = random_milp(rng, 8, 3, 5)
    model = model_from(c, A, b, lb, ub, binary)
    a = S.solve_milp(model, S.SolverParams(gap=0, engine="simplex"))
    h = S.solve_milp(model, S.SolverParams(gap=0, engine="highs"))
    assert a.objective == pytest.approx(h.objective, abs=1e-7)


def test_external_backend_agrees():
    w, v, cap = knapsack(3)
    model = model_from(-v, w[None, :], [cap], np.zeros(8), np.ones(8), np.ones(8, bool))
    a = S.solve_model(model, S.SolverParams(gap=0), "reference")
    b = S.solve_model(model, S.SolverParams(gap=0), "external")
    assert a.objective == pytest.approx(b.objective)


def test_external_infeasible():
    model = model_from([0.0], [[1.0], [-1.0]], [0.4, -0.6], [0], [1], [True])
    assert S.solve_model(model, S.SolverParams(), "external").status == "infeasible"


# --- interchange formats ----------------------------------------------------------

TOY_MPS = """\
NAME          toy
OBJSENSE
    MIN
ROWS
 N  OBJ
 L  cap
COLUMNS
    MARKER0000 'MARKER'                'INTORG'
    y         OBJ       -3
    y         cap       2
    MARKER0000 'MARKER'                'INTEND'
    x         OBJ       -1
    x         cap       1
RHS
    RHS       cap       3
BOUNDS
 BV BND       y
 LO BND       x         0
 UP BND       x         2.5
ENDATA
"""


def test_toy_mps_text():
    model = MicpModel.from_arrays([-3, -1], [[2, 1]], "L", [3], [0, 0], [1, 2.5], [True, False],
                                  name="toy", var_names=("y", "x"), row_names=("cap",))
    assert S.mps_dumps(model) == TOY_MPS
    back = S.mps_loads(TOY_MPS)
    assert back.n_vars == 2 and back.n_rows == 1 and back.n_binary == 1
    assert np.allclose(back.A.toarray(), model.A.toarray())


def test_mps_name_collisions_suffixed():
    model = MicpModel.from_arrays([1, 1], [[1, 1]], "L", [1], [0, 0], [1, 1],
                                  var_names=("a b", "a_b"))
    text = S.mps_dumps(model)
    assert "a_b~1" in text
    assert S.mps_loads(text).n_vars == 2


def test_lp_dump_deterministic():
    rng = np.random.default_rng(2)
    c, A, b, lb, ub, binary = random_milp(rng, 4, 2, 3)
    model = model_from(c, A, b, lb, ub, binary)
    assert S.lp_dumps(model) == S.lp_dumps(model)
    assert S.lp_dumps(model).startswith("\\ model\nMinimize\n")


def test_solution_round_trip():
    w, v, cap = knapsack(1)
    model = model_from(-v, w[None, :], [cap], np.zeros(8), np.ones(8), np.ones(8, bool))
    r = S.solve_milp(model)
    status, obj, bound, vals = S.solution_loads(S.solution_dumps(model, r))
    assert status == r.status and obj == r.objective
    assert [vals[f"x{k}"] for k in range(8)] == list(r.x)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_property_mps_round_trip_counts(seed):
    rng = np.random.default_rng(seed)
    c, A, b, lb, ub, binary = random_milp(rng, int(rng.integers(0, 5)), int(rng.integers(1, 5)),
                                          int(rng.integers(1, 5)))
    model = model_from(c, A, b, lb, ub, binary)
    back = S.mps_loads(S.mps_dumps(model))
    assert (back.n_vars, back.n_rows, back.n_binary) == (model.n_vars, model.n_rows,
                                                         model.n_binary)
    assert np.allclose(back.A.toarray(), model.A.toarray())
    assert np.allclose(back.rhs, model.rhs) and np.allclose(back.c, model.c)


def test_pure_lp_through_milp_entry():
    model = MicpModel.from_arrays([1.0, 1.0], [[1.0, 1.0]], "G", [1.5], [0, 0], [1, 1])
    r = S.solve_milp(model)
    assert r.status == "optimal" and r.objective == pytest.approx(1.5) and r.nodes == 0
