"""Reference MILP solver and model interchange.

``solve_lp`` is a dense two-phase tableau simplex.  ``solve_milp`` is a
best-bound branch and bound over binaries whose node relaxations run either
on that simplex or on HiGHS (warm started from the parent basis).  Models
can also be written as MPS and handed to HiGHS's own MILP solver.
"""
from __future__ import annotations

import concurrent.futures
import dataclasses
import heapq
import io
import logging
import math
import re
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .transcribe import MicpModel

log = logging.getLogger(__name__)

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"
GAP_LIMIT, TIME_LIMIT, NODE_LIMIT = "gap-limit", "time-limit", "node-limit"


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# dense two-phase simplex


@dataclasses.dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    value: float = math.nan
    iterations: int = 0
    basis: object = None
    stats: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class LpTableau:
    """Standard-form tableau ``[A | rhs]`` with objective in the last row."""

    T: np.ndarray
    basis: list
    n_art: int = 0

    @property
    def m(self):
        return self.T.shape[0] - 1

    def pivot(self, r, c):
        T = self.T
        T[r] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = c


def _run_simplex(tab: LpTableau, ncols, tol, max_iter, degenerate_limit, bland=False):
    """Minimize the last tableau row over the first ``ncols`` columns."""
    T = tab.T
    it = 0
    degenerate = 0
    while True:
        d = T[-1, :ncols]
        if bland:
            cand = np.flatnonzero(d < -tol)
            if len(cand) == 0:
                return "optimal", it, bland
            c = int(cand[0])
        else:
            c = int(np.argmin(d))
            if d[c] >= -tol:
                return "optimal", it, bland
        col = T[:-1, c]
        pos = col > tol
        if not pos.any():
            return "unbounded", it, bland
        ratios = np.full(len(col), np.inf)
        ratios[pos] = T[:-1, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        r = int(min(ties, key=lambda i: tab.basis[i]))
        degenerate = degenerate + 1 if best <= 1e-12 else 0
        if degenerate > degenerate_limit:
            bland = True
        tab.pivot(r, c)
        it += 1
        if it >= max_iter:
            return "stalled", it, bland


def _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub):
    """Map ``x`` to non-negative ``y`` with ``x = P y + o``."""
    n = len(c)
    cols, offs = [], np.zeros(n)
    P_rows, P_cols, P_vals = [], [], []
    upper = []            # (y index, bound)
    ny = 0
    for j in range(n):
        l, u = lb[j], ub[j]
        if np.isfinite(l):
            offs[j] = l
            P_rows.append(j), P_cols.append(ny), P_vals.append(1.0)
            if np.isfinite(u):
                upper.append((ny, u - l))
            ny += 1
        elif np.isfinite(u):
            offs[j] = u
            P_rows.append(j), P_cols.append(ny), P_vals.append(-1.0)
            ny += 1
        else:
            P_rows += [j, j]
            P_cols += [ny, ny + 1]
            P_vals += [1.0, -1.0]
            ny += 2
    P = np.zeros((n, ny))
    P[P_rows, P_cols] = P_vals
    blocks, rhs, ineq = [], [], []
    if A_ub is not None and len(b_ub):
        blocks.append(A_ub @ P)
        rhs.append(b_ub - A_ub @ offs)
        ineq += [True] * len(b_ub)
    for y, bnd in upper:
        row = np.zeros((1, ny))
        row[0, y] = 1.0
        blocks.append(row)
        rhs.append([bnd])
        ineq.append(True)
    if A_eq is not None and len(b_eq):
        blocks.append(A_eq @ P)
        rhs.append(b_eq - A_eq @ offs)
        ineq += [False] * len(b_eq)
    A = np.vstack(blocks) if blocks else np.zeros((0, ny))
    b = np.concatenate([np.asarray(r, dtype=float) for r in rhs]) if rhs else np.zeros(0)
    return A, b, np.array(ineq, dtype=bool), P, offs


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None, tol=1e-9,
             max_iter=None, degenerate_limit=50, perturb=0.0):
    """Minimize ``c.x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, bounds.

    Missing bounds default to ``x >= 0``.  Returns an :class:`LpResult` with
    status ``optimal``, ``infeasible`` or ``unbounded``.  If the pivot budget
    runs out the problem is re-solved once with a tiny right-hand-side
    perturbation under Bland's rule and the final basis is re-evaluated
    against the unperturbed data.
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    dense = lambda M: None if M is None else (M.toarray() if sp.issparse(M) else np.asarray(M, float))
    A_ub, A_eq = dense(A_ub), dense(A_eq)
    b_ub = None if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = None if b_eq is None else np.asarray(b_eq, dtype=float)
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub + tol):
        return LpResult(INFEASIBLE)
    A, b, ineq, P, offs = _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub)
    m, ny = A.shape
    n_slack = int(ineq.sum())
    S = np.zeros((m, n_slack))
    S[np.flatnonzero(ineq), np.arange(n_slack)] = 1.0
    A = np.hstack([A, S])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    rng = np.random.default_rng(0)
    b_run = b + perturb * (1.0 + rng.random(m)) if perturb else b
    N = A.shape[1]
    basis = [-1] * m
    slack_rows = np.flatnonzero(ineq)
    for k, r in enumerate(slack_rows):
        if sign[r] > 0:
            basis[r] = ny + k
    art_rows = [r for r in range(m) if basis[r] < 0]
    n_art = len(art_rows)
    Art = np.zeros((m, n_art))
    for k, r in enumerate(art_rows):
        Art[r, k] = 1.0
        basis[r] = N + k
    T = np.zeros((m + 1, N + n_art + 2))
    T[:m, :N] = A
    T[:m, N:N + n_art] = Art
    T[:m, -2] = b          # shadow copy of the unperturbed rhs
    T[:m, -1] = b_run
    # phase 1 objective: sum of artificials, priced out
    for r in art_rows:
        T[-1] -= T[r]
    T[-1, N:N + n_art] = 0.0
    tab = LpTableau(T, basis, n_art)
    max_iter = max_iter or 50 * (m + N + 10)
    stats = {"phase1": 0, "phase2": 0, "bland": False, "perturbed": bool(perturb)}
    bland = perturb > 0
    status, it, bland = _run_simplex(tab, N + n_art, tol, max_iter, degenerate_limit, bland)
    stats["phase1"] = it
    if status == "stalled" and not perturb:
        res = solve_lp(c, A_ub, b_ub, A_eq, b_eq, lb, ub, tol, max_iter, degenerate_limit,
                       perturb=1e-9)
        res.stats["restarted"] = True
        return res
    scale = 1.0 + np.abs(b_run).max(initial=0.0)
    if -T[-1, -1] > 1e-7 * scale:
        return LpResult(INFEASIBLE, iterations=it, stats=stats)
    # drive remaining artificials out of the basis; drop redundant rows
    keep = np.ones(m + 1, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= N:
            nz = np.flatnonzero(np.abs(T[r, :N]) > 1e-9)
            if len(nz):
                tab.pivot(r, int(nz[0]))
            else:
                keep[r] = False
    T = np.delete(tab.T[keep], np.s_[N:N + n_art], axis=1)
    basis = [bv for bv, k in zip(tab.basis, keep[:-1]) if k]
    cy = np.concatenate([P.T @ c, np.zeros(n_slack)])
    T[-1, :] = 0.0
    T[-1, :N] = cy
    for r, bv in enumerate(basis):
        if cy[bv] != 0:
            T[-1] -= cy[bv] * T[r]
    tab = LpTableau(T, basis)
    status, it2, bland = _run_simplex(tab, N, tol, max_iter, degenerate_limit, bland)
    stats["phase2"] = it2
    stats["bland"] = bland
    if status == "stalled":
        if not perturb:
            res = solve_lp(c, A_ub, b_ub, A_eq, b_eq, lb, ub, tol, max_iter, degenerate_limit,
                           perturb=1e-9)
            res.stats["restarted"] = True
            return res
        raise SolverError("simplex stalled even with perturbation")
    if status == "unbounded":
        return LpResult(UNBOUNDED, iterations=it + it2, stats=stats)
    z = np.zeros(N)
    col = -2 if perturb else -1
    for r, bv in enumerate(tab.basis):
        z[bv] = tab.T[r, col]
    if perturb and z.min() < -1e-7:
        raise SolverError("perturbed basis infeasible after restoring the data")
    z = np.maximum(z, 0.0)
    x = P @ z[:ny] + offs
    x = np.clip(x, lb, ub)
    return LpResult(OPTIMAL, x, float(c @ x), it + it2, basis=list(tab.basis), stats=stats)


# ---------------------------------------------------------------------------
# relaxation engines


class SimplexEngine:
    """Node relaxations on the dense simplex (no warm start)."""

    name = "simplex"

    def __init__(self, model: MicpModel):
        self.model = model
        A_ub, b_ub, A_eq, b_eq = model.as_inequalities()
        self.data = (A_ub.toarray(), b_ub, A_eq.toarray(), b_eq)

    def solve(self, lb, ub, basis=None):
        A_ub, b_ub, A_eq, b_eq = self.data
        return solve_lp(self.model.c, A_ub, b_ub, A_eq, b_eq, lb, ub)


class HighsEngine:
    """Node relaxations on HiGHS's dual simplex, warm started from a basis."""

    name = "highs"

    def __init__(self, model: MicpModel):
        import highspy
        self._hs = highspy
        self.model = model
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        lp = highspy.HighsLp()
        A = model.A.tocsc()
        lp.num_col_ = model.n_vars
        lp.num_row_ = model.n_rows
        lp.col_cost_ = np.asarray(model.c, dtype=float)
        lp.col_lower_ = np.asarray(model.lb, dtype=float)
        lp.col_upper_ = np.asarray(model.ub, dtype=float)
        lo = np.where(model.sense == "L", -np.inf, model.rhs)
        hi = np.where(model.sense == "G", np.inf, model.rhs)
        lp.row_lower_ = lo
        lp.row_upper_ = hi
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data.astype(float)
        lp.a_matrix_.num_col_ = model.n_vars
        lp.a_matrix_.num_row_ = model.n_rows
        lp.offset_ = float(model.c0)
        h.passModel(lp)
        self.h = h
        self._idx = np.arange(model.n_vars, dtype=np.int32)

    def solve(self, lb, ub, basis=None):
        hs, h = self._hs, self.h
        h.changeColsBounds(len(self._idx), self._idx, np.asarray(lb, float), np.asarray(ub, float))
        if basis is not None:
            h.setBasis(basis)
        else:
            h.clearSolver()
        h.run()
        st = h.getModelStatus()
        it = h.getInfo().simplex_iteration_count
        if st == hs.HighsModelStatus.kOptimal:
            x = np.array(h.getSolution().col_value)
            return LpResult(OPTIMAL, x, float(self.model.c @ x), it, basis=h.getBasis())
        if st == hs.HighsModelStatus.kInfeasible:
            return LpResult(INFEASIBLE, iterations=it)
        if st in (hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kUnboundedOrInfeasible):
            # bounds are finite, so this can only mean infeasible
            return LpResult(INFEASIBLE, iterations=it)
        raise SolverError(f"relaxation failed with status {h.modelStatusToString(st)}")


def make_engine(model: MicpModel, engine="auto"):
    if engine == "auto":
        engine = "simplex" if model.n_rows * model.n_vars <= 40_000 else "highs"
    if engine == "simplex":
        return SimplexEngine(model)
    if engine == "highs":
        return HighsEngine(model)
    raise ValueError(f"unknown LP engine {engine!r}")


# ---------------------------------------------------------------------------
# branch and bound


@dataclasses.dataclass(frozen=True)
class SolverParams:
    gap: float = 1e-4
    time_limit: float | None = None
    node_limit: int | None = None
    threads: int = 1
    int_tol: float = 1e-6
    engine: str = "auto"
    batch: int = 4
    heuristic_every: int = 10
    heuristic_effort: float = 0.05


@dataclasses.dataclass(order=True)
class BnbNode:
    bound: float
    seq: int
    lb: np.ndarray = dataclasses.field(compare=False)
    ub: np.ndarray = dataclasses.field(compare=False)
    x: np.ndarray = dataclasses.field(compare=False)
    basis: object = dataclasses.field(compare=False, default=None)
    var: int = dataclasses.field(compare=False, default=-1)
    direction: int = dataclasses.field(compare=False, default=0)
    depth: int = dataclasses.field(compare=False, default=0)


@dataclasses.dataclass
class MilpResult:
    status: str
    x: np.ndarray | None
    objective: float
    bound: float
    nodes: int = 0
    stats: dict = dataclasses.field(default_factory=dict)

    @property
    def gap(self):
        return relative_gap(self.objective, self.bound)

    @property
    def has_solution(self):
        return self.x is not None


def relative_gap(inc, bound):
    if not np.isfinite(inc):
        return math.inf
    return max(0.0, inc - bound) / max(1e-10, abs(inc))


def _most_fractional(x, binaries, tol):
    if len(binaries) == 0:
        return None
    v = x[binaries]
    frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
    k = int(np.argmax(frac))       # argmax returns the lowest index on ties
    if frac[k] <= tol:
        return None
    return int(binaries[k])


def _polish(model, engine, x, basis=None):
    """Fix rounded binaries and re-solve the continuous part."""
    lb, ub = model.lb.copy(), model.ub.copy()
    bins = np.flatnonzero(model.binary)
    r = np.clip(np.round(x[bins]), model.lb[bins], model.ub[bins])
    lb[bins] = ub[bins] = r
    res = engine.solve(lb, ub, basis)
    if res.status != OPTIMAL:
        return None
    y = res.x.copy()
    y[bins] = r
    return y


def solve_milp(model: MicpModel, params: SolverParams = SolverParams(), engine=None,
               callback=None) -> MilpResult:
    """Best-bound branch and bound over the model's binaries.

    Node relaxations are evaluated in fixed-size batches so the explored tree
    does not depend on ``params.threads``.  ``callback(node, bound,
    incumbent)`` is invoked after each batch.
    """
    t0 = time.perf_counter()
    engines = [engine or make_engine(model, params.engine)]
    for _ in range(1, max(1, params.threads)):
        engines.append(make_engine(model, engines[0].name))
    bins = np.flatnonzero(model.binary)
    stats = {"engine": engines[0].name, "lp_solves": 0, "lp_iterations": 0, "trace": []}
    inc_x, inc_val = None, math.inf

    def consider(x):
        nonlocal inc_x, inc_val
        y = _polish(model, engines[0], x)
        stats["lp_solves"] += 1
        if y is None or model.max_violation(y) > 1e-6:
            return
        v = model.objective(y)
        if v < inc_val - 1e-12:
            inc_x, inc_val = y, v

    root = engines[0].solve(model.lb, model.ub)
    stats["lp_solves"] += 1
    stats["lp_iterations"] += root.iterations
    if root.status == INFEASIBLE:
        return MilpResult(INFEASIBLE, None, math.inf, math.inf, 0, stats)
    if root.status != OPTIMAL:
        raise SolverError(f"root relaxation {root.status}")
    if _most_fractional(root.x, bins, params.int_tol) is None:
        consider(root.x)
        if inc_x is not None and inc_val <= root.value + 1e-9 * max(1.0, abs(root.value)):
            stats["time"] = time.perf_counter() - t0
            return MilpResult(OPTIMAL, inc_x, inc_val, inc_val, 0, stats)
    seq = 0
    heap = [BnbNode(root.value, seq, model.lb.copy(), model.ub.copy(), root.x, root.basis)]
    nodes = 0
    status = None
    pool = (concurrent.futures.ThreadPoolExecutor(params.threads)
            if params.threads > 1 else None)
    try:
        while heap:
            bound = heap[0].bound
            if inc_x is not None:
                gap_abs = inc_val - bound
                if gap_abs <= 1e-9 * max(1.0, abs(inc_val)):
                    heap.clear()
                    break
                if relative_gap(inc_val, bound) <= params.gap:
                    status = GAP_LIMIT
                    break
            if params.time_limit is not None and time.perf_counter() - t0 > params.time_limit:
                status = TIME_LIMIT
                break
            if params.node_limit is not None and nodes >= params.node_limit:
                status = NODE_LIMIT
                break
            batch = []
            while heap and len(batch) < params.batch:
                nd = heapq.heappop(heap)
                if nd.bound >= inc_val - 1e-9 * max(1.0, abs(inc_val)):
                    continue
                batch.append(nd)
            jobs = []
            for nd in batch:
                nodes += 1
                var = _most_fractional(nd.x, bins, params.int_tol)
                if var is None:
                    consider(nd.x)
                    continue
                if nodes == 1 or nodes % params.heuristic_every == 0:
                    consider(nd.x)
                for d, val in ((0, 0.0), (1, 1.0)):
                    lb, ub = nd.lb.copy(), nd.ub.copy()
                    lb[var] = ub[var] = val
                    jobs.append((nd, var, d, lb, ub))

            def run(k):
                nd, var, d, lb, ub = jobs[k]
                return engines[k % len(engines)].solve(lb, ub, nd.basis)

            if pool is not None and len(engines) > 1:
                # one engine per lane keeps engines single-threaded
                lanes = [list(range(lane, len(jobs), len(engines)))
                         for lane in range(len(engines))]
                futs = [pool.submit(lambda ids: [run(i) for i in ids], ids) for ids in lanes]
                results = [None] * len(jobs)
                for ids, fut in zip(lanes, futs):
                    for i, r in zip(ids, fut.result()):
                        results[i] = r
            else:
                results = [run(k) for k in range(len(jobs))]
            for (nd, var, d, lb, ub), res in zip(jobs, results):
                stats["lp_solves"] += 1
                stats["lp_iterations"] += res.iterations
                if res.status != OPTIMAL:
                    continue
                if res.value >= inc_val - 1e-9 * max(1.0, abs(inc_val)):
                    continue
                if _most_fractional(res.x, bins, params.int_tol) is None:
                    consider(res.x)
                    continue
                seq += 1
                heapq.heappush(heap, BnbNode(max(res.value, nd.bound), seq, lb, ub, res.x,
                                             res.basis, var, d, nd.depth + 1))
            glob = min(heap[0].bound if heap else math.inf, inc_val)
            stats["trace"].append((nodes, glob, inc_val))
            if callback is not None:
                callback(nodes, glob, inc_val)
    finally:
        if pool is not None:
            pool.shutdown()
    bound = min(heap[0].bound, inc_val) if heap else inc_val
    stats["time"] = time.perf_counter() - t0
    if status is None:
        status = OPTIMAL if inc_x is not None else INFEASIBLE
        if inc_x is not None:
            bound = min(bound, inc_val)
    if inc_x is None and status == INFEASIBLE:
        return MilpResult(INFEASIBLE, None, math.inf, math.inf, nodes, stats)
    return MilpResult(status, inc_x, inc_val, bound if inc_x is not None or heap else math.inf,
                      nodes, stats)


def solve_external(model: MicpModel, params: SolverParams = SolverParams()) -> MilpResult:
    """Solve through an MPS file with HiGHS's MILP solver.

    The returned point has its binaries rounded and its continuous part
    re-solved, so it satisfies the rows to LP precision.
    """
    import highspy
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "model.mps"
        path.write_text(mps_dumps(model))
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("threads", max(1, params.threads))
        h.setOptionValue("mip_rel_gap", params.gap)
        h.setOptionValue("mip_feasibility_tolerance", params.int_tol)
        h.setOptionValue("mip_heuristic_effort", float(params.heuristic_effort))
        if params.time_limit is not None:
            h.setOptionValue("time_limit", float(params.time_limit))
        if params.node_limit is not None:
            h.setOptionValue("mip_max_nodes", int(params.node_limit))
        h.readModel(str(path))
        h.run()
    st = h.getModelStatus()
    info = h.getInfo()
    stats = {"engine": "highs-mps", "time": time.perf_counter() - t0,
             "nodes": int(info.mip_node_count)}
    M = highspy.HighsModelStatus
    if st == M.kInfeasible:
        return MilpResult(INFEASIBLE, None, math.inf, math.inf, stats["nodes"], stats)
    status = {M.kOptimal: OPTIMAL, M.kTimeLimit: TIME_LIMIT,
              M.kSolutionLimit: NODE_LIMIT}.get(st)
    if st == M.kIterationLimit or str(st).endswith("NodeLimit"):
        status = NODE_LIMIT
    if status is None:
        raise SolverError(f"external solver returned {h.modelStatusToString(st)}")
    bound = float(info.mip_dual_bound)
    if info.primal_solution_status == 0:
        return MilpResult(status, None, math.inf, bound, stats["nodes"], stats)
    x = np.array(h.getSolution().col_value)
    y = _polish(model, HighsEngine(model), x)
    if y is None or model.max_violation(y) > 1e-6:
        raise SolverError("external incumbent failed the row check after polishing")
    v = model.objective(y)
    return MilpResult(status, y, v, min(bound, v), stats["nodes"], stats)


def solve_model(model: MicpModel, params: SolverParams = SolverParams(), backend="reference"):
    if backend == "reference":
        return solve_milp(model, params)
    if backend == "external":
        return solve_external(model, params)
    raise ValueError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# MPS and LP text


_NAME_BAD = re.compile(r"[^A-Za-z0-9_.\[\]()-]")


def _num(v):
    return format(float(v), ".17g")


def _unique_names(names):
    out, seen = [], set()
    for nm in names:
        base = _NAME_BAD.sub("_", nm) or "_"
        cand, k = base, 0
        while cand in seen:
            k += 1
            cand = f"{base}~{k}"
        seen.add(cand)
        out.append(cand)
    return out


def _field(*parts):
    """Fixed-format columns 2, 5, 15, 25, 40, 50; wider names push right."""
    starts = (1, 4, 14, 24, 39, 49)
    line = ""
    for s, p in zip(starts, parts):
        if p is None:
            continue
        if len(line) < s:
            line += " " * (s - len(line))
        elif line:
            line += " "
        line += p
    return line.rstrip()


def mps_dumps(model: MicpModel) -> str:
    """Fixed-format MPS text of the model (always a minimization)."""
    cols = _unique_names(model.var_names)
    rows = _unique_names(model.row_names)
    obj = "OBJ"
    while obj in rows:
        obj += "_"
    out = io.StringIO()
    w = out.write
    w(f"NAME          {_NAME_BAD.sub('_', model.name) or 'model'}\n")
    w("OBJSENSE\n    MIN\n")
    w("ROWS\n")
    w(_field("N", obj) + "\n")
    for nm, s in zip(rows, model.sense):
        w(_field(s, nm) + "\n")
    w("COLUMNS\n")
    A = model.A.tocsc()
    in_int = False
    marker = 0
    for j, nm in enumerate(cols):
        if model.binary[j] and not in_int:
            w(_field(None, f"MARKER{marker:04d}", "'MARKER'", None, "'INTORG'") + "\n")
            in_int = True
        elif not model.binary[j] and in_int:
            w(_field(None, f"MARKER{marker:04d}", "'MARKER'", None, "'INTEND'") + "\n")
            marker += 1
            in_int = False
        entries = []
        if model.c[j] != 0:
            entries.append((obj, model.c[j]))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        order = np.argsort(A.indices[lo:hi], kind="stable")
        for k in order:
            entries.append((rows[A.indices[lo + k]], A.data[lo + k]))
        if not entries:
            entries.append((obj, 0.0))
        for r, v in entries:
            w(_field(None, nm, r, _num(v)) + "\n")
    if in_int:
        w(_field(None, f"MARKER{marker:04d}", "'MARKER'", None, "'INTEND'") + "\n")
    w("RHS\n")
    if model.c0 != 0:
        w(_field(None, "RHS", obj, _num(-model.c0)) + "\n")
    for nm, v in zip(rows, model.rhs):
        if v != 0:
            w(_field(None, "RHS", nm, _num(v)) + "\n")
    w("BOUNDS\n")
    for j, nm in enumerate(cols):
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            w(_field("FX", "BND", nm, _num(lo)) + "\n")
        elif model.binary[j] and lo == 0 and hi == 1:
            w(_field("BV", "BND", nm) + "\n")
        else:
            w(_field("LO", "BND", nm, _num(lo)) + "\n")
            w(_field("UP", "BND", nm, _num(hi)) + "\n")
    w("ENDATA\n")
    return out.getvalue()


def export_mps(model: MicpModel, path):
    Path(path).write_text(mps_dumps(model))


def mps_loads(text: str) -> MicpModel:
    """Parse MPS text written by :func:`mps_dumps` (free-format tokens)."""
    section = None
    name = "model"
    sense_max = False
    obj = None
    row_names, row_sense = [], []
    row_idx = {}
    col_names, col_idx = [], {}
    entries = []
    c = {}
    rhs = {}
    c0 = 0.0
    integer = set()
    bounds = {}
    in_int = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0]
            if section == "NAME" and len(tok) > 1:
                name = tok[1]
            if section == "OBJSENSE" and len(tok) > 1:
                sense_max = tok[1] == "MAX"
            if section == "ENDATA":
                break
            continue
        if section == "OBJSENSE":
            sense_max = tok[0] == "MAX"
        elif section == "ROWS":
            s, nm = tok
            if s == "N":
                if obj is None:
                    obj = nm
                continue
            row_idx[nm] = len(row_names)
            row_names.append(nm)
            row_sense.append(s)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                in_int = tok[2] == "'INTORG'"
                continue
            cn = tok[0]
            if cn not in col_idx:
                col_idx[cn] = len(col_names)
                col_names.append(cn)
                if in_int:
                    integer.add(cn)
            for r, v in zip(tok[1::2], tok[2::2]):
                if r == obj:
                    c[col_idx[cn]] = c.get(col_idx[cn], 0.0) + float(v)
                elif r in row_idx:
                    entries.append((row_idx[r], col_idx[cn], float(v)))
                else:
                    raise ValueError(f"line {lineno}: unknown row {r}")
        elif section == "RHS":
            for r, v in zip(tok[1::2], tok[2::2]):
                if r == obj:
                    c0 = -float(v)
                else:
                    rhs[row_idx[r]] = float(v)
        elif section == "BOUNDS":
            kind, _, cn = tok[:3]
            val = float(tok[3]) if len(tok) > 3 else None
            bounds.setdefault(cn, []).append((kind, val))
        elif section == "RANGES":
            raise ValueError(f"line {lineno}: RANGES are not supported")
    n = len(col_names)
    lb, ub = np.zeros(n), np.full(n, np.inf)
    binary = np.zeros(n, dtype=bool)
    for cn in integer:
        j = col_idx[cn]
        ub[j] = 1.0
    for cn, items in bounds.items():
        j = col_idx[cn]
        for kind, val in items:
            if kind == "LO":
                lb[j] = val
            elif kind == "UP":
                ub[j] = val
            elif kind == "FX":
                lb[j] = ub[j] = val
            elif kind == "BV":
                lb[j], ub[j] = 0.0, 1.0
                binary[j] = True
            elif kind == "FR":
                lb[j], ub[j] = -np.inf, np.inf
            elif kind == "MI":
                lb[j] = -np.inf
            else:
                raise ValueError(f"bound type {kind} not supported")
    for cn in integer:
        binary[col_idx[cn]] = True
    cvec = np.zeros(n)
    for j, v in c.items():
        cvec[j] = v
    if sense_max:
        cvec, c0 = -cvec, -c0
    A = sp.csr_matrix(([e[2] for e in entries], ([e[0] for e in entries], [e[1] for e in entries])),
                      shape=(len(row_names), n))
    r = np.zeros(len(row_names))
    for i, v in rhs.items():
        r[i] = v
    return MicpModel(name, tuple(col_names), lb, ub, binary, A, np.array(row_sense, dtype="<U1"),
                     r, tuple(row_names), cvec, c0, {}, np.zeros((0, 3)))


def _terms(coefs, names):
    parts = []
    for v, nm in zip(coefs, names):
        sgn = "-" if v < 0 else "+"
        parts.append(f"{sgn} {_num(abs(v))} {nm}")
    s = " ".join(parts) if parts else "0"
    return s[2:] if s.startswith("+ ") else s


def lp_dumps(model: MicpModel) -> str:
    """Human-readable LP-style listing of the model."""
    cols = _unique_names(model.var_names)
    rows = _unique_names(model.row_names)
    out = io.StringIO()
    w = out.write
    w(f"\\ {model.name}\nMinimize\n")
    nz = np.flatnonzero(model.c)
    w(f" obj: {_terms(model.c[nz], [cols[j] for j in nz])}")
    if model.c0:
        w(f" + {_num(model.c0)}")
    w("\nSubject To\n")
    A = model.A.tocsr()
    op = {"L": "<=", "G": ">=", "E": "="}
    for i, nm in enumerate(rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        order = np.argsort(A.indices[lo:hi], kind="stable")
        idx = A.indices[lo:hi][order]
        val = A.data[lo:hi][order]
        w(f" {nm}: {_terms(val, [cols[j] for j in idx])} {op[model.sense[i]]} {_num(model.rhs[i])}\n")
    w("Bounds\n")
    for j, nm in enumerate(cols):
        if model.lb[j] == model.ub[j]:
            w(f" {nm} = {_num(model.lb[j])}\n")
        elif not (model.binary[j] and model.lb[j] == 0 and model.ub[j] == 1):
            w(f" {_num(model.lb[j])} <= {nm} <= {_num(model.ub[j])}\n")
    w("Binaries\n")
    for j in np.flatnonzero(model.binary):
        w(f" {cols[j]}\n")
    w("End\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# solution file


def solution_dumps(model: MicpModel, result: MilpResult) -> str:
    lines = [f"STATUS {result.status}",
             f"OBJECTIVE {_num(result.objective)}",
             f"BOUND {_num(result.bound)}"]
    if result.x is not None:
        for nm, v in zip(_unique_names(model.var_names), result.x):
            lines.append(f"VAR {nm} {_num(v)}")
    return "\n".join(lines) + "\n"


def solution_loads(text: str):
    """``(status, objective, bound, {name: value})``."""
    status, obj, bound, vals = None, math.nan, math.nan, {}
    for lineno, ln in enumerate(text.splitlines(), 1):
        if not ln.strip():
            continue
        tok = ln.split()
        if tok[0] == "STATUS":
            status = tok[1]
        elif tok[0] == "OBJECTIVE":
            obj = float(tok[1])
        elif tok[0] == "BOUND":
            bound = float(tok[1])
        elif tok[0] == "VAR" and len(tok) == 3:
            vals[tok[1]] = float(tok[2])
        else:
            raise ValueError(f"line {lineno}: cannot parse {ln!r}")
    if status is None:
        raise ValueError("solution file has no STATUS line")
    return status, obj, bound, vals
