"""Mixed-integer transcription of the multi-jump planning problem.

The model is backend neutral: bounded continuous and binary columns, sparse
linear rows and a linear objective (always minimized).  Sampled stance states
are affine in the wrench control values and the initial state, so they never
appear as columns; only their rows do.

Implications ``B = 1  =>  a.x <= b`` are written as
``a.x + M B <= b + M`` with ``M = max(a.x) - b`` over the bounds of ``a.x``.
Those bounds come from explicit box rows on the sampled states and wrenches,
so each ``M`` is as small as the box allows.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import bezier, geometry
from .robot import Cell, RobotModel, StanceMode

OBJECTIVES = ("feasibility", "max_x_TD", "min_L1_goal_deviation")
AXES = ("x", "z", "th")
CHANNELS = ("fx", "fz", "ty")


class ScenarioError(ValueError):
    pass


class ModelBuildError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class Segment:
    """Straight terrain piece from ``x0`` to ``x1`` starting at height ``z0``."""

    x0: float
    x1: float
    z0: float
    slope: float = 0.0

    def z_at(self, x):
        return self.z0 + self.slope * (x - self.x0)

    @property
    def theta(self):
        return math.atan(self.slope)


@dataclasses.dataclass(frozen=True)
class Goal:
    segment: int
    x_lo: float
    x_hi: float
    theta_lo: float | None = None
    theta_hi: float | None = None

    @property
    def x_goal(self):
        return 0.5 * (self.x_lo + self.x_hi)


@dataclasses.dataclass(frozen=True)
class InitSet:
    """Initial stance frame and box on the initial local state."""

    frame: tuple = (0.0, 0.0, 0.0)
    q_lo: tuple = (0.0, 0.18, 0.0)
    q_hi: tuple = (0.0, 0.18, 0.0)
    qd_lo: tuple = (0.0, 0.0, 0.0)
    qd_hi: tuple = (0.0, 0.0, 0.0)
    static: bool = True


@dataclasses.dataclass(frozen=True)
class Scenario:
    terrain: tuple
    goal: Goal
    init: InitSet = InitSet()
    n_jumps: int = 1
    T_st: float = 0.2
    N_t: int = 9
    order: int = 5
    qd_to_lo: tuple = (-3.0, -3.0, -10.0)
    qd_to_hi: tuple = (3.0, 3.0, 10.0)
    t_air: tuple = (0.1, 0.8)
    pwl_segments: int = 8
    objective: str = "feasibility"
    mccormick: str = "piecewise"
    support_cuts: bool = True
    foot_margin: float | None = None
    zero_liftoff_wrench: bool = True
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "terrain", tuple(self.terrain))
        if not self.terrain:
            raise ScenarioError("terrain has no segments")
        segs = sorted(self.terrain, key=lambda s: s.x0)
        for s in segs:
            if not s.x1 > s.x0:
                raise ScenarioError(f"segment {s} has non-positive length")
        for a, b in zip(segs, segs[1:]):
            if b.x0 < a.x1:
                raise ScenarioError("terrain segments overlap in x")
        if self.n_jumps < 1:
            raise ScenarioError("need at least one jump")
        if not self.t_air[0] > 0 or not self.t_air[1] > self.t_air[0]:
            raise ScenarioError("aerial time bounds must satisfy 0 < T_min < T_max")
        if self.objective not in OBJECTIVES:
            raise ScenarioError(f"unknown objective {self.objective!r}")
        if not 0 <= self.goal.segment < len(self.terrain):
            raise ScenarioError("goal segment index out of range")
        seg = self.terrain[self.goal.segment]
        if self.goal.x_lo > self.goal.x_hi or self.goal.x_hi < seg.x0 or self.goal.x_lo > seg.x1:
            raise ScenarioError("goal region does not lie on its segment")
        if self.mccormick not in ("plain", "piecewise"):
            raise ScenarioError(f"unknown McCormick variant {self.mccormick!r}")
        if self.N_t < 2 or self.order < 1 or self.pwl_segments < 1:
            raise ScenarioError("N_t >= 2, order >= 1 and pwl_segments >= 1 required")

    def margin(self, robot: RobotModel):
        return robot.L / 2 if self.foot_margin is None else self.foot_margin

    def foothold_interval(self, i, robot: RobotModel):
        s = self.terrain[i]
        m = self.margin(robot)
        return s.x0 + m, s.x1 - m


@dataclasses.dataclass(frozen=True, eq=False)
class MicpModel:
    """Finished, immutable mixed-integer linear model (minimization)."""

    name: str
    var_names: tuple
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray          # 'L', 'E' or 'G' per row
    rhs: np.ndarray
    row_names: tuple
    c: np.ndarray
    c0: float
    roles: dict
    bigm: np.ndarray           # (row, binary column, M) per implication row

    @classmethod
    def from_arrays(cls, c, A, sense, rhs, lb, ub, binary=None, name="model", var_names=None,
                    row_names=None, c0=0.0):
        """Model from plain arrays; handy for small hand-made instances."""
        c = np.asarray(c, dtype=float)
        n = len(c)
        A = sp.csr_matrix(np.asarray(A, dtype=float).reshape(-1, n) if not sp.issparse(A) else A)
        m = A.shape[0]
        sense = np.array(list(sense) if isinstance(sense, str) else sense, dtype="<U1")
        binary = np.zeros(n, bool) if binary is None else np.asarray(binary, bool)
        lb = np.asarray(lb, dtype=float).copy()
        ub = np.asarray(ub, dtype=float).copy()
        lb[binary] = np.maximum(lb[binary], 0.0)
        ub[binary] = np.minimum(ub[binary], 1.0)
        return cls(name, tuple(var_names or (f"x{k}" for k in range(n))), lb, ub, binary, A,
                   sense, np.asarray(rhs, dtype=float), tuple(row_names or (f"r{k}" for k in range(m))),
                   c, float(c0), {}, np.zeros((0, 3)))

    @property
    def n_vars(self):
        return len(self.var_names)

    @property
    def n_rows(self):
        return len(self.row_names)

    @property
    def n_binary(self):
        return int(self.binary.sum())

    @property
    def n_continuous(self):
        return self.n_vars - self.n_binary

    def index(self, name):
        return self.var_names.index(name)

    def as_inequalities(self):
        """``(A_ub, b_ub, A_eq, b_eq)`` in ``<=`` / ``==`` form."""
        A = self.A
        le = self.sense == "L"
        ge = self.sense == "G"
        eq = self.sense == "E"
        A_ub = sp.vstack([A[np.flatnonzero(le)], -A[np.flatnonzero(ge)]]).tocsr()
        b_ub = np.concatenate([self.rhs[le], -self.rhs[ge]])
        return A_ub, b_ub, A[np.flatnonzero(eq)], self.rhs[eq]

    def row_activity(self, x):
        return self.A @ np.asarray(x, dtype=float)

    def max_violation(self, x):
        """Largest row or bound violation of point ``x``."""
        x = np.asarray(x, dtype=float)
        act = self.A @ x
        v = np.zeros(len(act))
        le, ge, eq = self.sense == "L", self.sense == "G", self.sense == "E"
        v[le] = act[le] - self.rhs[le]
        v[ge] = self.rhs[ge] - act[ge]
        v[eq] = np.abs(act[eq] - self.rhs[eq])
        bnd = np.maximum(self.lb - x, x - self.ub)
        return float(max(v.max(initial=0.0), bnd.max(initial=0.0)))

    def objective(self, x):
        return float(self.c @ x + self.c0)


class _Builder:
    def __init__(self, name):
        self.name = name
        self.names, self.lb, self.ub, self.bin = [], [], [], []
        self._name_set = set()
        self.rows_i, self.rows_j, self.rows_v = [], [], []
        self.sense, self.rhs, self.row_names = [], [], []
        self.c = {}
        self.c0 = 0.0
        self.roles = {}
        self.bigm = []

    def var(self, name, lb, ub, binary=False):
        if name in self._name_set:
            raise ModelBuildError(f"duplicate variable {name}")
        if not (np.isfinite(lb) and np.isfinite(ub)) or lb > ub + 1e-12:
            raise ModelBuildError(f"bad bounds for {name}: [{lb}, {ub}]")
        self._name_set.add(name)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(max(lb, ub)))
        self.bin.append(bool(binary))
        return len(self.names) - 1

    def row(self, expr, sense, rhs, name):
        idx, coef, const = expr
        r = len(self.rhs)
        idx = np.asarray(idx, dtype=int)
        coef = np.asarray(coef, dtype=float)
        keep = coef != 0
        self.rows_i.extend([r] * int(keep.sum()))
        self.rows_j.extend(idx[keep].tolist())
        self.rows_v.extend(coef[keep].tolist())
        self.sense.append(sense)
        self.rhs.append(float(rhs - const))
        self.row_names.append(name)
        return r

    def bounds_of(self, expr, box=None):
        """Interval of an affine expression over column bounds."""
        idx, coef, const = expr
        lb = np.asarray(self.lb)[idx]
        ub = np.asarray(self.ub)[idx]
        lo = const + np.sum(np.minimum(coef * lb, coef * ub))
        hi = const + np.sum(np.maximum(coef * lb, coef * ub))
        return lo, hi

    def implies_le(self, expr, b, binvar, hi, name):
        """``binvar = 1 => expr <= b`` given ``expr <= hi`` always."""
        if not np.isfinite(hi):
            raise ModelBuildError(f"unbounded big-M for {name}; tighten bounds")
        M = hi - b
        if M <= 0:
            return None
        idx, coef, const = expr
        r = self.row((np.r_[idx, binvar], np.r_[coef, M], const), "L", b + M, name)
        self.bigm.append((r, binvar, M))
        return r

    def finalize(self):
        n = len(self.names)
        A = sp.csr_matrix((self.rows_v, (self.rows_i, self.rows_j)), shape=(len(self.rhs), n))
        A.sum_duplicates()
        c = np.zeros(n)
        for k, v in self.c.items():
            c[k] = v
        arrays = dict(lb=np.array(self.lb), ub=np.array(self.ub), binary=np.array(self.bin),
                      sense=np.array(self.sense, dtype="<U1"), rhs=np.array(self.rhs), c=c,
                      bigm=np.array(self.bigm, dtype=float).reshape(-1, 3))
        for a in arrays.values():
            a.setflags(write=False)
        return MicpModel(self.name, tuple(self.names), A=A, row_names=tuple(self.row_names),
                         c0=self.c0, roles=self.roles, **arrays)


def _lin(idx, coef, const=0.0):
    return np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), float(const)


def _add(*exprs):
    idx = np.concatenate([e[0] for e in exprs])
    coef = np.concatenate([e[1] for e in exprs])
    return idx, coef, sum(e[2] for e in exprs)


def _scale(e, s):
    return e[0], e[1] * s, e[2] * s


def _box_hi(a, lo, hi):
    return float(np.sum(np.maximum(a * lo, a * hi)))


def _union_box(points):
    P = np.vstack(points)
    return P.min(axis=0), P.max(axis=0)


class _Context:
    """Shared quantities for all jumps of one build."""

    def __init__(self, scenario: Scenario, robot: RobotModel, cells: Sequence[Cell]):
        if not cells:
            raise ModelBuildError("no cells to plan over")
        if any(c.fwp is None for c in cells):
            raise ModelBuildError("every cell needs a wrench polytope")
        self.sc, self.robot, self.cells = scenario, robot, list(cells)
        self.M = scenario.order
        self.times = bezier.sample_times(scenario.N_t, scenario.T_st)
        self.W, self.Q, self.V = bezier.stance_maps(self.M, scenario.T_st, self.times,
                                                    robot.D, robot.a_g)
        self.q_lo, self.q_hi = _union_box([c.vertices for c in cells])
        self.f_lo, self.f_hi = _union_box([c.fwp.V for c in cells])
        span = np.maximum(np.abs(self.f_lo), np.abs(self.f_hi))
        # control values are not curve values; give them room
        self.alpha_bound = 4.0 * span + 1.0
        if scenario.support_cuts:
            Vq = [c.vertices for c in cells]
            Vf = [c.fwp.V for c in cells]
            self.q_dirs = _directions(np.vstack(Vq))
            self.f_dirs = _directions(np.vstack(Vf))
            self.q_support = np.array([[float(np.max(V @ a)) for V in Vq] for a in self.q_dirs])
            self.f_support = np.array([[float(np.max(V @ a)) for V in Vf] for a in self.f_dirs])
        g = robot.g
        t0, t1 = scenario.t_air
        self.qd_lo = np.array(scenario.qd_to_lo, dtype=float)
        self.qd_hi = np.array(scenario.qd_to_hi, dtype=float)
        ag = robot.a_g
        self.qd_land_lo = self.qd_lo + np.minimum(ag * t0, ag * t1)
        self.qd_land_hi = self.qd_hi + np.maximum(ag * t0, ag * t1)
        del g


def add_stance_dynamics(b: _Builder, ctx: _Context, j: int):
    """Columns of stance ``j``: wrench control values and initial state.

    Returns the column indices of the stacked decision vector and the affine
    expressions of sampled wrench, configuration and twist.
    """
    sc, M = ctx.sc, ctx.M
    A = np.empty((3, M + 1), dtype=int)
    for ch, chn in enumerate(CHANNELS):
        bnd = ctx.alpha_bound[ch]
        for k in range(M + 1):
            A[ch, k] = b.var(f"aF_{j}_{chn}_{k}", -bnd, bnd)
    if j == 1:
        init = sc.init
        qlo, qhi, vlo, vhi = init.q_lo, init.q_hi, init.qd_lo, init.qd_hi
    else:
        qlo, qhi, vlo, vhi = ctx.q_lo, ctx.q_hi, ctx.qd_land_lo, ctx.qd_land_hi
    q0 = np.array([b.var(f"q0_{j}_{a}", qlo[i], qhi[i]) for i, a in enumerate(AXES)])
    qd0 = np.array([b.var(f"qd0_{j}_{a}", vlo[i], vhi[i]) for i, a in enumerate(AXES)])
    z = np.concatenate([A.ravel(), q0, qd0])
    if j == 1 and sc.init.static:
        w0 = -ctx.robot.D @ ctx.robot.a_g
        for ch in range(3):
            b.lb[A[ch, 0]] = b.ub[A[ch, 0]] = float(w0[ch])
    if sc.zero_liftoff_wrench:
        for ch in range(3):
            b.lb[A[ch, M]] = b.ub[A[ch, M]] = 0.0
    wr = [[_lin(z, G[c], h[c]) for c in range(3)] for G, h in ctx.W]
    cf = [[_lin(z, G[c], h[c]) for c in range(3)] for G, h in ctx.Q]
    tw = [[_lin(z, G[c], h[c]) for c in range(3)] for G, h in ctx.V]
    # sampled states and wrenches stay inside the union boxes of the cells
    for i in range(len(ctx.times)):
        for c in range(3):
            b.row(cf[i][c], "L", ctx.q_hi[c], f"qbox_hi_{j}_{i}_{c}")
            b.row(cf[i][c], "G", ctx.q_lo[c], f"qbox_lo_{j}_{i}_{c}")
            b.row(wr[i][c], "L", ctx.f_hi[c], f"fbox_hi_{j}_{i}_{c}")
            b.row(wr[i][c], "G", ctx.f_lo[c], f"fbox_lo_{j}_{i}_{c}")
    b.roles.setdefault("alpha_F", {})[j] = A
    b.roles.setdefault("q0", {})[j] = q0
    b.roles.setdefault("qd0", {})[j] = qd0
    return dict(z=z, wrench=wr, config=cf, twist=tw)


def _cell_rows(b, ctx, expr3, P, lo, hi, binvar, tag):
    """Big-M rows ``binvar => P.A x <= P.b, P.Ae x = P.be`` for affine ``x``."""
    def dot(a):
        return _add(*[_scale(expr3[c], a[c]) for c in range(3) if a[c] != 0]) \
            if np.any(a != 0) else _lin([], [], 0.0)

    for r, (a, rhs) in enumerate(zip(P.A, P.b)):
        b.implies_le(dot(a), rhs, binvar, _box_hi(a, lo, hi), f"{tag}_{r}")
    for r, (a, rhs) in enumerate(zip(P.Ae, P.be)):
        b.implies_le(dot(a), rhs, binvar, _box_hi(a, lo, hi), f"{tag}_eu{r}")
        b.implies_le(dot(-a), -rhs, binvar, _box_hi(-a, lo, hi), f"{tag}_el{r}")


def _support_rows(b, expr3, dirs, support, B, tag):
    """``a.x <= sum_k h_k(a) B_k``: exact for one-hot ``B``, tight when fractional."""
    for r, a in enumerate(dirs):
        terms = [_scale(expr3[c], a[c]) for c in range(3) if a[c] != 0]
        b.row(_add(*terms, _lin(B, -support[r])), "L", 0.0, f"{tag}_{r}")


def _directions(points):
    """Coordinate axes plus the facet normals of the hull of ``points``."""
    D = [np.eye(3), -np.eye(3)]
    try:
        H = geometry.vrep_to_hrep(geometry.ConvexPolytope(3, V=np.asarray(points)))
        if H.A is not None and len(H.A):
            D.append(H.A / np.linalg.norm(H.A, axis=1, keepdims=True))
    except geometry.GeometryError:
        pass
    return np.vstack(D)


def add_cell_assignment(b: _Builder, ctx: _Context, j: int, stance):
    """Binary cell choice per stance sample, with geometry and wrench rows."""
    N_t, cells = len(ctx.times), ctx.cells
    B = np.empty((N_t, len(cells)), dtype=int)
    for i in range(N_t):
        for k, cell in enumerate(cells):
            B[i, k] = b.var(f"Bcs_{j}_{i}_{cell.id}", 0, 1, binary=True)
    for i in range(N_t):
        for k, cell in enumerate(cells):
            _cell_rows(b, ctx, stance["config"][i], cell.geo, ctx.q_lo, ctx.q_hi, B[i, k],
                       f"geo_{j}_{i}_{cell.id}")
            _cell_rows(b, ctx, stance["wrench"][i], cell.fwp, ctx.f_lo, ctx.f_hi, B[i, k],
                       f"fwp_{j}_{i}_{cell.id}")
        b.row(_lin(B[i], np.ones(len(cells))), "E", 1.0, f"cs_sum_{j}_{i}")
        if ctx.sc.support_cuts:
            _support_rows(b, stance["config"][i], ctx.q_dirs, ctx.q_support, B[i],
                          f"qsup_{j}_{i}")
            _support_rows(b, stance["wrench"][i], ctx.f_dirs, ctx.f_support, B[i],
                          f"fsup_{j}_{i}")
    b.roles.setdefault("B_cs", {})[j] = B
    return B


def add_landing_cell(b: _Builder, ctx: _Context, q_start):
    """Final touchdown pose must lie in some cell (geometry only)."""
    cells = ctx.cells
    B = np.array([b.var(f"Bland_{c.id}", 0, 1, binary=True) for c in cells])
    expr = [_lin([q_start[c]], [1.0]) for c in range(3)]
    for k, cell in enumerate(cells):
        _cell_rows(b, ctx, expr, cell.geo, ctx.q_lo, ctx.q_hi, B[k], f"land_{cell.id}")
    b.row(_lin(B, np.ones(len(cells))), "E", 1.0, "land_sum")
    b.roles["B_land"] = B
    return B


def _mccormick(b, v, T, w, vlo, vhi, tlo, thi, tag):
    """Four envelope rows for ``w = v * T`` with ``v`` affine, ``T`` a column."""
    Tx = _lin([T], [1.0])
    W = _lin([w], [1.0])
    # w >= vlo T + v tlo - vlo tlo
    b.row(_add(W, _scale(Tx, -vlo), _scale(v, -tlo)), "G", -vlo * tlo, f"{tag}_a")
    # w >= vhi T + v thi - vhi thi
    b.row(_add(W, _scale(Tx, -vhi), _scale(v, -thi)), "G", -vhi * thi, f"{tag}_b")
    # w <= vhi T + v tlo - vhi tlo
    b.row(_add(W, _scale(Tx, -vhi), _scale(v, -tlo)), "L", -vhi * tlo, f"{tag}_c")
    # w <= vlo T + v thi - vlo thi
    b.row(_add(W, _scale(Tx, -vlo), _scale(v, -thi)), "L", -vlo * thi, f"{tag}_d")


def add_aerial_phase(b: _Builder, ctx: _Context, j: int, stance, frame_prev, frame_next,
                     start_next, qd_next, t_fixed=None):
    """Ballistic flight linking take-off of stance ``j`` to the next touchdown.

    ``frame_prev`` is the current stance frame (columns or constants),
    ``frame_next`` the landing frame columns, ``start_next`` the local pose at
    landing and ``qd_next`` the next stance's initial twist columns (or
    ``None`` after the final jump).  With ``t_fixed`` the flight time is
    pinned and the flight rows are exact.
    """
    sc, robot = ctx.sc, ctx.robot
    tlo, thi = sc.t_air
    ag = robot.a_g
    grid = None
    if t_fixed is not None:
        grid = np.unique(np.atleast_1d(np.asarray(t_fixed, dtype=float)))
        tlo, thi = float(grid[0]), float(grid[-1])
        if len(grid) == 1:
            grid = None
            t_fixed = tlo
    T = b.var(f"Tair_{j}", tlo, thi)
    v_end = stance["twist"][-1]
    q_end = stance["config"][-1]
    for c in range(3):
        b.row(v_end[c], "L", ctx.qd_hi[c], f"vto_hi_{j}_{c}")
        b.row(v_end[c], "G", ctx.qd_lo[c], f"vto_lo_{j}_{c}")
    w = []
    for c, a in enumerate(AXES):
        vlo, vhi = ctx.qd_lo[c], ctx.qd_hi[c]
        prods = [vlo * tlo, vlo * thi, vhi * tlo, vhi * thi]
        wc = b.var(f"w_{j}_{a}", min(prods), max(prods))
        w.append(wc)
        if grid is not None:
            continue
        if t_fixed is None:
            _mccormick(b, v_end[c], T, wc, vlo, vhi, tlo, thi, f"mc_{j}_{a}")
        else:
            b.row(_add(_lin([wc], [1.0]), _scale(v_end[c], -tlo)), "E", 0.0, f"wx_{j}_{a}")
    s = b.var(f"s_{j}", tlo * tlo, thi * thi)
    if grid is not None:
        _exact_time_grid(b, j, grid, T, s, w, v_end, ctx.qd_lo, ctx.qd_hi)
    elif t_fixed is None:
        K = sc.pwl_segments
        knots = np.linspace(tlo, thi, K + 1)
        lam = np.array([b.var(f"lam_{j}_{k}", 0, 1) for k in range(K + 1)])
        seg = np.array([b.var(f"seg_{j}_{k}", 0, 1, binary=True) for k in range(K)])
        b.row(_lin(lam, np.ones(K + 1)), "E", 1.0, f"pwl_lsum_{j}")
        b.row(_lin(seg, np.ones(K)), "E", 1.0, f"pwl_ssum_{j}")
        b.row(_lin(np.r_[lam, T], np.r_[knots, -1.0]), "E", 0.0, f"pwl_t_{j}")
        b.row(_lin(np.r_[lam, s], np.r_[knots ** 2, -1.0]), "E", 0.0, f"pwl_s_{j}")
        for k in range(K + 1):
            adj = [seg[m] for m in (k - 1, k) if 0 <= m < K]
            b.row(_lin(np.r_[lam[k], adj], np.r_[1.0, -np.ones(len(adj))]), "L", 0.0,
                  f"pwl_adj_{j}_{k}")
        if sc.mccormick == "piecewise":
            _piecewise_mccormick(b, j, knots, seg, T, w, v_end, ctx.qd_lo, ctx.qd_hi)
        b.roles.setdefault("pwl_lambda", {})[j] = lam
        b.roles.setdefault("pwl_seg", {})[j] = seg
        b.roles.setdefault("pwl_knots", {})[j] = knots
    # touchdown position: frame_next + start_next = frame_prev + q_end + w + a_g s / 2
    for c, a in enumerate(AXES):
        lhs = _lin([frame_next[c], start_next[c], w[c], s], [1.0, 1.0, -1.0, -0.5 * ag[c]])
        fp = frame_prev[c]
        if isinstance(fp, (int, np.integer)):
            rhs_expr = _add(q_end[c], _lin([fp], [1.0]))
        else:
            rhs_expr = _add(q_end[c], _lin([], [], float(fp)))
        b.row(_add(lhs, _scale(rhs_expr, -1.0)), "E", 0.0, f"land_q_{j}_{a}")
        if qd_next is not None:
            e = _add(_lin([qd_next[c], T], [1.0, -ag[c]]), _scale(v_end[c], -1.0))
            b.row(e, "E", 0.0, f"land_v_{j}_{a}")
    b.roles.setdefault("t_air", {})[j] = T
    b.roles.setdefault("w", {})[j] = np.array(w)
    b.roles.setdefault("s", {})[j] = s
    return T


def _piecewise_mccormick(b, j, knots, seg, T, w, v_end, vlo, vhi):
    """Envelope of ``w = v T`` on the flight-time segment picked by ``seg``.

    ``T``, ``v`` and ``w`` are split into per-segment copies that vanish off
    the active segment; each copy gets the four envelope rows of its own
    ``[t_k, t_k+1]`` box.  The worst-case slack shrinks by the segment count.
    """
    K = len(seg)
    Tk = np.array([b.var(f"Tk_{j}_{k}", 0.0, knots[k + 1]) for k in range(K)])
    b.row(_lin(np.r_[Tk, T], np.r_[np.ones(K), -1.0]), "E", 0.0, f"pmc_t_{j}")
    for k in range(K):
        b.row(_lin([Tk[k], seg[k]], [1.0, -knots[k + 1]]), "L", 0.0, f"pmc_th_{j}_{k}")
        b.row(_lin([Tk[k], seg[k]], [1.0, -knots[k]]), "G", 0.0, f"pmc_tl_{j}_{k}")
    for c, a in enumerate(AXES):
        lo, hi = vlo[c], vhi[c]
        vk = np.array([b.var(f"pv_{j}_{a}_{k}", min(0.0, lo), max(0.0, hi)) for k in range(K)])
        prods = [lo * knots[0], lo * knots[-1], hi * knots[0], hi * knots[-1], 0.0]
        wk = np.array([b.var(f"pw_{j}_{a}_{k}", min(prods), max(prods)) for k in range(K)])
        b.row(_add(_lin(vk, np.ones(K)), _scale(v_end[c], -1.0)), "E", 0.0, f"pmc_v_{j}_{a}")
        b.row(_lin(np.r_[wk, w[c]], np.r_[np.ones(K), -1.0]), "E", 0.0, f"pmc_w_{j}_{a}")
        for k in range(K):
            t0, t1 = knots[k], knots[k + 1]
            y, v, t, ww = seg[k], vk[k], Tk[k], wk[k]
            tag = f"pmc_{j}_{a}_{k}"
            b.row(_lin([v, y], [1.0, -hi]), "L", 0.0, f"{tag}_vh")
            b.row(_lin([v, y], [1.0, -lo]), "G", 0.0, f"{tag}_vl")
            b.row(_lin([ww, t, v, y], [1.0, -lo, -t0, lo * t0]), "G", 0.0, f"{tag}_a")
            b.row(_lin([ww, t, v, y], [1.0, -hi, -t1, hi * t1]), "G", 0.0, f"{tag}_b")
            b.row(_lin([ww, t, v, y], [1.0, -hi, -t0, hi * t0]), "L", 0.0, f"{tag}_c")
            b.row(_lin([ww, t, v, y], [1.0, -lo, -t1, lo * t1]), "L", 0.0, f"{tag}_d")


def _exact_time_grid(b, j, grid, T, s, w, v_end, vlo, vhi):
    """Flight time restricted to ``grid``; products exact via disaggregation.

    With ``y_k`` selecting ``t_k`` and ``v = sum_k v_k``, ``v_k`` vanishing
    unless ``y_k = 1``, the rows ``w = sum_k t_k v_k`` and
    ``s = sum_k t_k**2 y_k`` hold with equality for the chosen grid time.
    """
    K = len(grid)
    y = np.array([b.var(f"tg_{j}_{k}", 0, 1, binary=True) for k in range(K)])
    b.row(_lin(y, np.ones(K)), "E", 1.0, f"tg_sum_{j}")
    b.row(_lin(np.r_[y, T], np.r_[grid, -1.0]), "E", 0.0, f"tg_t_{j}")
    b.row(_lin(np.r_[y, s], np.r_[grid ** 2, -1.0]), "E", 0.0, f"tg_s_{j}")
    for c, a in enumerate(AXES):
        vk = np.array([b.var(f"vg_{j}_{a}_{k}", min(0.0, vlo[c]), max(0.0, vhi[c]))
                       for k in range(K)])
        b.row(_add(_lin(vk, np.ones(K)), _scale(v_end[c], -1.0)), "E", 0.0, f"vg_sum_{j}_{a}")
        b.row(_lin(np.r_[vk, w[c]], np.r_[grid, -1.0]), "E", 0.0, f"vg_w_{j}_{a}")
        for k in range(K):
            b.row(_lin([vk[k], y[k]], [1.0, -vhi[c]]), "L", 0.0, f"vg_hi_{j}_{a}_{k}")
            b.row(_lin([vk[k], y[k]], [1.0, -vlo[c]]), "G", 0.0, f"vg_lo_{j}_{a}_{k}")
    b.roles.setdefault("t_grid", {})[j] = y


def add_foothold(b: _Builder, ctx: _Context, q_td):
    """Segment choice per jump: touchdown frame on exactly one segment."""
    sc, robot = ctx.sc, ctx.robot
    N_s, N = len(sc.terrain), sc.n_jumps
    Bfp = np.empty((N_s, N), dtype=int)
    for i in range(N_s):
        for j in range(1, N + 1):
            Bfp[i, j - 1] = b.var(f"Bfp_{i + 1}_{j}", 0, 1, binary=True)
    for j in range(1, N + 1):
        x, z, th = q_td[j]
        xlo_all, xhi_all = b.lb[x], b.ub[x]
        for i, seg in enumerate(sc.terrain):
            xl, xh = sc.foothold_interval(i, robot)
            B = Bfp[i, j - 1]
            if xl > xh:
                b.ub[B] = 0.0
                continue
            tag = f"fp_{i + 1}_{j}"
            b.implies_le(_lin([x], [-1.0]), -xl, B, -xlo_all, f"{tag}_xl")
            b.implies_le(_lin([x], [1.0]), xh, B, xhi_all, f"{tag}_xh")
            line = _lin([z, x], [1.0, -seg.slope])
            lo, hi = b.bounds_of(line)
            off = seg.z0 - seg.slope * seg.x0
            b.implies_le(line, off, B, hi, f"{tag}_zu")
            b.implies_le(_scale(line, -1.0), -off, B, -lo, f"{tag}_zl")
            b.implies_le(_lin([th], [1.0]), seg.theta, B, b.ub[th], f"{tag}_tu")
            b.implies_le(_lin([th], [-1.0]), -seg.theta, B, -b.lb[th], f"{tag}_tl")
        b.row(_lin(Bfp[:, j - 1], np.ones(N_s)), "E", 1.0, f"fp_sum_{j}")
    goal = sc.goal
    b.lb[Bfp[goal.segment, N - 1]] = 1.0
    x, z, th = q_td[N]
    b.lb[x] = max(b.lb[x], goal.x_lo)
    b.ub[x] = min(b.ub[x], goal.x_hi)
    if b.lb[x] > b.ub[x]:
        raise ScenarioError("goal interval lies outside the usable part of its segment")
    if goal.theta_lo is not None:
        b.lb[th] = max(b.lb[th], goal.theta_lo)
    if goal.theta_hi is not None:
        b.ub[th] = min(b.ub[th], goal.theta_hi)
    b.roles["B_fp"] = Bfp
    return Bfp


def set_objective(b: _Builder, ctx: _Context, q_td):
    sc = ctx.sc
    N = sc.n_jumps
    x, z, _ = q_td[N]
    b.c = {}
    if sc.objective == "max_x_TD":
        b.c[x] = -1.0
    elif sc.objective == "min_L1_goal_deviation":
        seg = sc.terrain[sc.goal.segment]
        xg = sc.goal.x_goal
        target = {x: xg, z: seg.z_at(xg)}
        devs = []
        for col, tgt in target.items():
            span = max(abs(b.ub[col] - tgt), abs(tgt - b.lb[col]))
            d = b.var(f"dev_{b.names[col]}", 0.0, span)
            b.row(_lin([d, col], [1.0, -1.0]), "G", -tgt, f"dev_p_{col}")
            b.row(_lin([d, col], [1.0, 1.0]), "G", tgt, f"dev_m_{col}")
            b.c[d] = 1.0
            devs.append(d)
        b.roles["goal_dev"] = np.array(devs)


def build(scenario: Scenario, robot: RobotModel, cells: Sequence[Cell], t_air_fixed=None,
          name=None) -> MicpModel:
    """Assemble the full model for all jumps.

    ``t_air_fixed`` optionally gives, per jump, one flight time or a grid of
    admissible times.  Either way the flight rows become exact (no envelope,
    no piecewise-affine square).
    """
    sc = scenario
    ctx = _Context(sc, robot, cells)
    b = _Builder(name or sc.name)
    N = sc.n_jumps
    seg_lo = min(s.x0 for s in sc.terrain)
    seg_hi = max(s.x1 for s in sc.terrain)
    zs = [s.z_at(s.x0) for s in sc.terrain] + [s.z_at(s.x1) for s in sc.terrain]
    ths = [s.theta for s in sc.terrain]

    stances = {}
    q_td = {}
    for j in range(1, N + 1):
        stances[j] = add_stance_dynamics(b, ctx, j)
        q_td[j] = np.array([b.var(f"qTD_{j}_x", seg_lo, seg_hi),
                            b.var(f"qTD_{j}_z", min(zs), max(zs)),
                            b.var(f"qTD_{j}_th", min(ths), max(ths))])
    b.roles["q_td"] = q_td
    for j in range(1, N + 1):
        add_cell_assignment(b, ctx, j, stances[j])
    q_start = np.array([b.var(f"qst_{a}", ctx.q_lo[c], ctx.q_hi[c]) for c, a in enumerate(AXES)])
    b.roles["q_start"] = q_start
    add_landing_cell(b, ctx, q_start)
    for j in range(1, N + 1):
        frame_prev = np.asarray(sc.init.frame, dtype=float) if j == 1 else q_td[j - 1]
        if j < N:
            start_next, qd_next = b.roles["q0"][j + 1], b.roles["qd0"][j + 1]
        else:
            start_next, qd_next = q_start, None
        fp = [float(v) for v in frame_prev] if j == 1 else list(frame_prev)
        tf = None if t_air_fixed is None else t_air_fixed[j - 1]
        add_aerial_phase(b, ctx, j, stances[j], fp, q_td[j], start_next, qd_next, tf)
    add_foothold(b, ctx, q_td)
    set_objective(b, ctx, q_td)
    b.roles["stance_maps"] = (ctx.W, ctx.Q, ctx.V)
    b.roles["cell_ids"] = np.array([c.id for c in cells])
    return b.finalize()


def stance_block(model: MicpModel):
    """Column indices of wrench control values, initial states and frames."""
    r = model.roles
    cols = []
    for j in sorted(r["alpha_F"]):
        cols.extend(np.ravel(r["alpha_F"][j]).tolist())
        cols.extend(r["q0"][j].tolist())
        cols.extend(r["qd0"][j].tolist())
        cols.extend(r["q_td"][j].tolist())
    return np.array(cols)


# ---------------------------------------------------------------------------
# plans


@dataclasses.dataclass(frozen=True)
class JumpRecord:
    """One stance phase followed by its flight."""

    frame: np.ndarray          # stance frame (global), x z theta
    alpha_F: np.ndarray        # (M+1, 3)
    q0: np.ndarray
    qd0: np.ndarray
    q_end: np.ndarray
    qd_end: np.ndarray
    t_air: float
    q_td: np.ndarray           # landing frame (global)
    segment: int               # terrain segment of the landing frame
    cells: tuple               # cell id per stance sample


@dataclasses.dataclass(frozen=True)
class JumpPlan:
    jumps: tuple
    q_start: np.ndarray        # local pose at the final touchdown
    T_st: float
    N_t: int
    order: int
    status: str
    objective: float
    robot_hash: str = ""
    stats: dict = dataclasses.field(default_factory=dict)

    @property
    def n_jumps(self):
        return len(self.jumps)

    def touchdown_global(self, j):
        """Global pose right after flight ``j`` (1-based)."""
        nxt = self.jumps[j].q0 if j < self.n_jumps else self.q_start
        return self.jumps[j - 1].q_td + nxt

    def b_cs(self, cell_ids):
        """Sample-by-cell assignment matrices, one per jump."""
        ids = list(cell_ids)
        out = []
        for jr in self.jumps:
            B = np.zeros((len(jr.cells), len(ids)))
            for i, cid in enumerate(jr.cells):
                B[i, ids.index(cid)] = 1.0
            out.append(B)
        return out

    def b_fp(self, n_segments):
        B = np.zeros((n_segments, self.n_jumps))
        for j, jr in enumerate(self.jumps):
            B[jr.segment, j] = 1.0
        return B


def plan_from_solution(model: MicpModel, x, scenario: Scenario, robot: RobotModel, status,
                       objective, stats=None) -> JumpPlan:
    """Read a :class:`JumpPlan` out of a model solution vector."""
    x = np.asarray(x, dtype=float)
    r = model.roles
    M = scenario.order
    cell_ids = r["cell_ids"]
    jumps = []
    Bfp = np.rint(x[r["B_fp"]])
    for j in sorted(r["alpha_F"]):
        aF = x[r["alpha_F"][j]].T.copy()
        q0, qd0 = x[r["q0"][j]], x[r["qd0"][j]]
        a_qd, a_q = bezier.stance_coefficients(aF, q0, qd0, scenario.T_st, robot.D, robot.a_g)
        frame = np.asarray(scenario.init.frame, float) if j == 1 else x[r["q_td"][j - 1]]
        B = x[r["B_cs"][j]]
        cells = tuple(int(cell_ids[k]) for k in np.argmax(B, axis=1))
        jumps.append(JumpRecord(frame=frame, alpha_F=aF, q0=q0, qd0=qd0, q_end=a_q[-1].copy(),
                                qd_end=a_qd[-1].copy(), t_air=float(x[r["t_air"][j]]),
                                q_td=x[r["q_td"][j]].copy(),
                                segment=int(np.argmax(Bfp[:, j - 1])), cells=cells))
    return JumpPlan(tuple(jumps), x[r["q_start"]].copy(), scenario.T_st, scenario.N_t, M,
                    status, float(objective), robot.content_hash(), dict(stats or {}))


def _vec(v):
    return " ".join(format(float(a), ".17g") for a in np.ravel(v))


def plan_dumps(plan: JumpPlan) -> str:
    lines = ["MICPJUMP-PLAN 1",
             f"ROBOT_HASH {plan.robot_hash}",
             f"STATUS {plan.status}",
             f"OBJECTIVE {format(plan.objective, '.17g')}",
             f"T_ST {format(plan.T_st, '.17g')}",
             f"N_T {plan.N_t}",
             f"ORDER {plan.order}",
             f"N_JUMPS {plan.n_jumps}"]
    for j, jr in enumerate(plan.jumps, 1):
        lines += [f"JUMP {j}",
                  f"FRAME {_vec(jr.frame)}",
                  f"Q0 {_vec(jr.q0)}",
                  f"QD0 {_vec(jr.qd0)}"]
        for ch, nm in enumerate(CHANNELS):
            lines.append(f"ALPHA_{nm.upper()} {_vec(jr.alpha_F[:, ch])}")
        lines += [f"Q_END {_vec(jr.q_end)}",
                  f"QD_END {_vec(jr.qd_end)}",
                  f"T_AIR {format(jr.t_air, '.17g')}",
                  f"Q_TD {_vec(jr.q_td)}",
                  f"SEGMENT {jr.segment}",
                  "CELLS " + " ".join(str(c) for c in jr.cells),
                  "END"]
    lines.append(f"Q_START {_vec(plan.q_start)}")
    for k in sorted(plan.stats):
        v = plan.stats[k]
        if isinstance(v, (int, float, str, np.integer, np.floating)):
            lines.append(f"STAT {k} {v}")
    return "\n".join(lines) + "\n"


class PlanFormatError(ValueError):
    pass


def plan_loads(text: str) -> JumpPlan:
    head, jumps, cur, stats = {}, [], None, {}
    q_start = None
    for lineno, ln in enumerate(text.splitlines(), 1):
        if not ln.strip():
            continue
        key, _, rest = ln.partition(" ")
        try:
            if lineno == 1:
                if ln.strip() != "MICPJUMP-PLAN 1":
                    raise PlanFormatError("missing MICPJUMP-PLAN 1 header")
            elif key == "JUMP":
                cur = {"alpha": [None, None, None]}
            elif key == "END":
                jumps.append(JumpRecord(
                    frame=cur["FRAME"], alpha_F=np.column_stack(cur["alpha"]), q0=cur["Q0"],
                    qd0=cur["QD0"], q_end=cur["Q_END"], qd_end=cur["QD_END"],
                    t_air=float(cur["T_AIR"][0]), q_td=cur["Q_TD"], segment=int(cur["SEGMENT"]),
                    cells=cur["CELLS"]))
                cur = None
            elif key.startswith("ALPHA_"):
                ch = [c.upper() for c in CHANNELS].index(key[6:])
                cur["alpha"][ch] = np.array(rest.split(), dtype=float)
            elif key == "SEGMENT":
                cur["SEGMENT"] = int(rest)
            elif key == "CELLS":
                cur["CELLS"] = tuple(int(c) for c in rest.split())
            elif cur is not None:
                cur[key] = np.array(rest.split(), dtype=float)
            elif key == "Q_START":
                q_start = np.array(rest.split(), dtype=float)
            elif key == "STAT":
                k, _, v = rest.partition(" ")
                stats[k] = v
            else:
                head[key] = rest.strip()
        except PlanFormatError:
            raise
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise PlanFormatError(f"line {lineno}: {exc}") from exc
    try:
        return JumpPlan(tuple(jumps), q_start, float(head["T_ST"]), int(head["N_T"]),
                        int(head["ORDER"]), head["STATUS"], float(head["OBJECTIVE"]),
                        head.get("ROBOT_HASH", ""), stats)
    except KeyError as exc:
        raise PlanFormatError(f"missing header {exc}") from exc
