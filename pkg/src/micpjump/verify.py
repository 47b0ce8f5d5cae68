"""Independent checks of a finished plan.

Nothing here reuses the model rows: states are re-derived from the wrench
control values, flight is integrated in closed form with the true flight
time, and every constraint is re-evaluated from the cells and the terrain.
"""
from __future__ import annotations

import dataclasses
import io
import math

import numpy as np

from . import bezier
from .robot import (LEGS, Cell, KinematicsError, RobotModel, StanceMode, hip_position,
                    leg_angles, leg_jacobian)
from .transcribe import JumpPlan, Scenario
from .wrench import decompose_wrench, moment_arm, wedge

TOL = 1e-6


class SingularityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# simulation


@dataclasses.dataclass
class Trajectory:
    """Global-frame samples of a simulated plan."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    phase: np.ndarray          # jump index (1-based) for stance, negative for flight
    touchdowns: list           # global pose and twist at each touchdown
    stance_end: list           # simulated local (q, qd) at each take-off


def _wrench_fn(jr, T):
    curve = bezier.BezierCurve(jr.alpha_F, T)

    def F(t):
        return curve(min(max(t, 0.0), T))
    return F


def _rk4_stance(F, q0, qd0, T, dt, Dinv, a_g):
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n
    y = np.concatenate([q0, qd0]).astype(float)

    def f(t, y):
        return np.concatenate([y[3:], Dinv @ F(t) + a_g])

    ts, ys = [0.0], [y.copy()]
    t = 0.0
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        ts.append(t)
        ys.append(y.copy())
    return np.array(ts), np.array(ys)


def simulate(plan: JumpPlan, robot: RobotModel, dt=1e-4, flight_samples=50) -> Trajectory:
    """RK4 through each stance, closed-form ballistic flight in between.

    Each stance starts from the simulated state at the previous touchdown
    (expressed in the plan's stance frame), so errors propagate honestly.
    """
    Dinv = np.linalg.inv(robot.D)
    a_g = robot.a_g
    T = plan.T_st
    ts, qs, qds, phs = [], [], [], []
    touchdowns, ends = [], []
    t0 = 0.0
    q_loc, qd = None, None
    for j, jr in enumerate(plan.jumps, 1):
        if q_loc is None:
            q_loc, qd = np.asarray(jr.q0, float), np.asarray(jr.qd0, float)
        tt, yy = _rk4_stance(_wrench_fn(jr, T), q_loc, qd, T, dt, Dinv, a_g)
        ts.append(t0 + tt)
        qs.append(yy[:, :3] + jr.frame)
        qds.append(yy[:, 3:])
        phs.append(np.full(len(tt), j))
        q_to = yy[-1, :3] + jr.frame
        v_to = yy[-1, 3:]
        ends.append((yy[-1, :3].copy(), v_to.copy()))
        t0 += T
        Ta = jr.t_air
        tf = np.linspace(0.0, Ta, flight_samples + 1)[1:]
        qf = q_to + np.outer(tf, v_to) + 0.5 * np.outer(tf ** 2, a_g)
        ts.append(t0 + tf)
        qs.append(qf)
        qds.append(v_to + np.outer(tf, a_g))
        phs.append(np.full(len(tf), -j))
        t0 += Ta
        q_td = q_to + v_to * Ta + 0.5 * a_g * Ta * Ta
        v_td = v_to + a_g * Ta
        touchdowns.append((q_td, v_td))
        q_loc = q_td - jr.q_td
        qd = v_td
    if not ts:
        z = np.zeros((0, 3))
        return Trajectory(np.zeros(0), z, z, np.zeros(0, dtype=int), [], [])
    return Trajectory(np.concatenate(ts), np.vstack(qs), np.vstack(qds), np.concatenate(phs),
                      touchdowns, ends)


def closed_form_stance(jr, plan: JumpPlan, robot: RobotModel, times):
    """Local ``q``, ``qd`` and wrench of one stance from its control values."""
    a_qd, a_q = bezier.stance_coefficients(jr.alpha_F, jr.q0, jr.qd0, plan.T_st, robot.D,
                                           robot.a_g)
    q = bezier.evaluate(bezier.BezierCurve(a_q, plan.T_st), times)
    qd = bezier.evaluate(bezier.BezierCurve(a_qd, plan.T_st), times)
    F = bezier.evaluate(bezier.BezierCurve(jr.alpha_F, plan.T_st), times)
    return q, qd, F


# ---------------------------------------------------------------------------
# audit


@dataclasses.dataclass
class Category:
    name: str
    worst: float
    tol: float
    where: str = ""

    @property
    def passed(self):
        return bool(self.worst <= self.tol)


@dataclasses.dataclass
class VerificationReport:
    categories: dict
    residuals: list            # (category, jump, sample, value)
    info: dict = dataclasses.field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.categories.values())

    def __getitem__(self, name):
        return self.categories[name]

    def to_text(self):
        out = io.StringIO()
        for c in self.categories.values():
            flag = "PASS" if c.passed else "FAIL"
            where = f"  at {c.where}" if c.where and c.worst > 0 else ""
            out.write(f"{flag} {c.name:<12} worst={c.worst:.3e} tol={c.tol:.3e}{where}\n")
        for k in sorted(self.info):
            out.write(f"INFO {k} {self.info[k]}\n")
        out.write(f"RESULT {'PASS' if self.passed else 'FAIL'}\n")
        return out.getvalue()

    def to_csv(self):
        lines = ["category,jump,sample,value"]
        for cat, j, i, v in self.residuals:
            lines.append(f"{cat},{j},{i},{v:.12g}")
        return "\n".join(lines) + "\n"


def polytope_residual(P, x):
    """Largest normalized violation of ``P``'s rows at ``x`` (0 inside)."""
    x = np.asarray(x, dtype=float)
    r = 0.0
    if P.A is not None and len(P.A):
        n = np.linalg.norm(P.A, axis=1)
        r = max(r, float(np.max((P.A @ x - P.b) / np.where(n > 0, n, 1.0))))
    if P.Ae is not None and len(P.Ae):
        n = np.linalg.norm(P.Ae, axis=1)
        r = max(r, float(np.max(np.abs(P.Ae @ x - P.be) / np.where(n > 0, n, 1.0))))
    return max(r, 0.0)


def pwl_bound(scenario: Scenario, g):
    """Worst ``g/2 |s - T^2|`` of the piecewise-affine square."""
    d = (scenario.t_air[1] - scenario.t_air[0]) / scenario.pwl_segments
    return g * d * d / 8.0


def mccormick_bound(scenario: Scenario):
    """Worst envelope slack of ``w = v T`` per axis (piecewise when configured)."""
    d = scenario.t_air[1] - scenario.t_air[0]
    if scenario.mccormick == "piecewise":
        d /= scenario.pwl_segments
    lo, hi = np.array(scenario.qd_to_lo), np.array(scenario.qd_to_hi)
    return (hi - lo) * d / 4.0


def audit(plan: JumpPlan, robot: RobotModel, cells, scenario: Scenario, tol=TOL,
          ballistic_tol=None, dt=1e-4) -> VerificationReport:
    """Re-check every planning constraint; always completes."""
    by_id = {c.id: c for c in cells}
    res = []
    worst = {}

    def note(cat, j, i, v):
        v = float(v)
        res.append((cat, j, i, v))
        if cat not in worst or v > worst[cat][0]:
            worst[cat] = (v, f"jump {j} sample {i}")

    for cat in ("geo", "fwp", "partition", "foothold", "goal", "init", "dynamics",
                "continuity", "ballistic", "simulation"):
        worst[cat] = (0.0, "")
    times = bezier.sample_times(plan.N_t, plan.T_st)
    a_g = robot.a_g
    for j, jr in enumerate(plan.jumps, 1):
        q, qd, F = closed_form_stance(jr, plan, robot, times)
        if len(jr.cells) != plan.N_t:
            note("partition", j, -1, 1.0)
        for i in range(min(len(jr.cells), plan.N_t)):
            cell = by_id.get(jr.cells[i])
            if cell is None:
                note("partition", j, i, 1.0)
                continue
            note("partition", j, i, 0.0)
            note("geo", j, i, polytope_residual(cell.geo, q[i]))
            if cell.fwp is not None:
                note("fwp", j, i, polytope_residual(cell.fwp, F[i]))
        # stored end state versus the control values
        note("dynamics", j, plan.N_t - 1, max(np.max(np.abs(q[-1] - jr.q_end)),
                                              np.max(np.abs(qd[-1] - jr.qd_end))))
        # foothold of the landing frame
        if not 0 <= jr.segment < len(scenario.terrain):
            note("partition", j, -1, 1.0)
        else:
            seg = scenario.terrain[jr.segment]
            xl, xh = scenario.foothold_interval(jr.segment, robot)
            x, z, th = jr.q_td
            note("foothold", j, -1, max(0.0, xl - x, x - xh, abs(z - seg.z_at(x)),
                                        abs(th - seg.theta)))
        lo, hi = scenario.t_air
        note("foothold", j, -1, max(0.0, lo - jr.t_air, jr.t_air - hi))
        # exact flight against the stored touchdown
        Ta = jr.t_air
        q_to = jr.frame + q[-1]
        exact = q_to + qd[-1] * Ta + 0.5 * a_g * Ta * Ta
        note("ballistic", j, -1, np.max(np.abs(exact - plan.touchdown_global(j))))
        if j < plan.n_jumps:
            nxt = plan.jumps[j]
            note("continuity", j, -1, np.max(np.abs(nxt.frame - jr.q_td)))
            note("continuity", j, -1, np.max(np.abs(nxt.qd0 - (qd[-1] + a_g * Ta))))
    # landing pose inside some cell
    if plan.n_jumps:
        land = min((polytope_residual(c.geo, plan.q_start) for c in cells), default=math.inf)
        note("geo", plan.n_jumps, -1, land)
        goal = scenario.goal
        last = plan.jumps[-1]
        x, th = last.q_td[0], last.q_td[2]
        g = max(0.0, goal.x_lo - x, x - goal.x_hi)
        if goal.theta_lo is not None:
            g = max(g, goal.theta_lo - th)
        if goal.theta_hi is not None:
            g = max(g, th - goal.theta_hi)
        if last.segment != goal.segment:
            g = max(g, 1.0)
        note("goal", plan.n_jumps, -1, g)
        first = plan.jumps[0]
        init = scenario.init
        v = max(0.0,
                float(np.max(np.asarray(init.q_lo) - first.q0)),
                float(np.max(first.q0 - np.asarray(init.q_hi))),
                float(np.max(np.asarray(init.qd_lo) - first.qd0)),
                float(np.max(first.qd0 - np.asarray(init.qd_hi))),
                float(np.max(np.abs(first.frame - np.asarray(init.frame)))))
        note("init", 1, 0, v)
        sim = simulate(plan, robot, dt)
        for j, jr in enumerate(plan.jumps, 1):
            qs, vs = sim.stance_end[j - 1]
            note("simulation", j, plan.N_t - 1,
                 max(np.max(np.abs(qs - jr.q_end)), np.max(np.abs(vs - jr.qd_end))))
    if ballistic_tol is None:
        ballistic_tol = pwl_bound(scenario, robot.g)
    tols = dict(geo=tol, fwp=tol, partition=0.0, foothold=tol, goal=tol, init=tol,
                dynamics=tol, continuity=tol, ballistic=ballistic_tol, simulation=tol)
    cats = {k: Category(k, worst[k][0], tols[k], worst[k][1]) for k in tols}
    info = {"pwl_bound": pwl_bound(scenario, robot.g),
            "mccormick_bound": " ".join(f"{v:.4g}" for v in mccormick_bound(scenario)),
            "ballistic_gap": worst["ballistic"][0]}
    return VerificationReport(cats, res, info)


# ---------------------------------------------------------------------------
# joint torques


def foot_jacobian(q, robot: RobotModel):
    """``4 x 7`` Jacobian of both feet over body pose and the four joint angles.

    Columns are ``(x, z, theta, hip_b, knee_b, hip_f, knee_f)`` with hip
    angles measured relative to the body; rows are the back and front foot
    ``(x, z)``.
    """
    q = np.asarray(q, dtype=float)
    J = np.zeros((4, 7))
    for k, leg in enumerate(LEGS):
        phi, knee = leg_angles(q, leg, robot)
        Jl = leg_jacobian((phi, knee), robot)
        s = 1.0 if leg == "front" else -1.0
        th = q[2]
        dhip = s * robot.L / 2 * np.array([-math.sin(th), -math.cos(th)])
        rows = slice(2 * k, 2 * k + 2)
        J[rows, 0] = (1.0, 0.0)
        J[rows, 1] = (0.0, 1.0)
        # the leg turns with the body: absolute thigh angle = hip - theta
        J[rows, 2] = dhip - Jl[:, 0]
        J[rows, 3 + 2 * k: 5 + 2 * k] = Jl
    return J


@dataclasses.dataclass(frozen=True)
class TorqueMap:
    Pi: np.ndarray             # 4 x 3, joint torques per unit body wrench
    J_foot: np.ndarray
    J_B: np.ndarray
    J_l: np.ndarray

    def torques(self, F):
        return self.Pi @ np.asarray(F, dtype=float)

    def wrench(self, u):
        """Body wrench produced by joint torques ``u`` with feet pinned."""
        return -self.J_B.T @ np.linalg.solve(self.J_l.T, np.asarray(u, dtype=float))


def torque_map(q, robot: RobotModel, rcond=1e-10) -> TorqueMap:
    """Minimum-norm joint torques realizing a body wrench in double stance."""
    try:
        J = foot_jacobian(q, robot)
    except KinematicsError as exc:
        raise SingularityError(f"configuration {tuple(q)} is out of reach: {exc}") from exc
    J_B, J_l = J[:, :3], J[:, 3:]
    for k, leg in enumerate(LEGS):
        blk = J_l[2 * k:2 * k + 2, 2 * k:2 * k + 2]
        sv = np.linalg.svd(blk, compute_uv=False)
        if sv[-1] <= rcond * max(1.0, sv[0]):
            raise SingularityError(f"{leg} leg Jacobian is singular (straight knee)")
    G = -J_B.T @ np.linalg.inv(J_l.T)          # 3 x 4: torques -> wrench
    Pi = np.linalg.pinv(G, rcond=rcond)
    return TorqueMap(Pi, J, J_B, J_l)


@dataclasses.dataclass
class TorqueSample:
    jump: int
    sample: int
    mode: str
    margin_pi: float           # tau_max - |Pi F|_inf (nan outside double stance)
    margin_lp: float           # tau_max - best achievable |tau|_inf (friction included)
    moment_residual: float = 0.0   # single stance: |tau_y - r ^ f| at the actual pose


def torque_audit(plan: JumpPlan, robot: RobotModel, cells):
    """Torque margins at every stance sample (reported, never asserted)."""
    by_id = {c.id: c for c in cells}
    times = bezier.sample_times(plan.N_t, plan.T_st)
    out = []
    for j, jr in enumerate(plan.jumps, 1):
        q, _, F = closed_form_stance(jr, plan, robot, times)
        for i in range(plan.N_t):
            cell = by_id.get(jr.cells[i]) if i < len(jr.cells) else None
            mode = cell.mode if cell is not None else StanceMode.DOUBLE
            legs = LEGS if mode == StanceMode.DOUBLE else (mode.value,)
            m_pi = math.nan
            if mode == StanceMode.DOUBLE:
                try:
                    m_pi = robot.tau_max - float(np.max(np.abs(torque_map(q[i], robot).torques(F[i]))))
                except SingularityError:
                    m_pi = -math.inf
            resid = 0.0
            try:
                if mode == StanceMode.DOUBLE:
                    _, tau = decompose_wrench(F[i], q[i], robot, legs)
                else:
                    # one contact: the force is the net force, the moment may not match
                    f = F[i][:2]
                    J = leg_jacobian(leg_angles(q[i], mode.value, robot), robot)
                    tau = float(np.max(np.abs(J.T @ f)))
                    if f[1] < 0 or abs(f[0]) > robot.mu * f[1] + 1e-9:
                        tau = math.inf
                    resid = abs(F[i][2] - wedge(moment_arm(q[i], mode.value, robot), f))
            except KinematicsError:
                tau = math.inf
            out.append(TorqueSample(j, i, mode.value, m_pi, robot.tau_max - tau, resid))
    return out


def torque_text(samples):
    lines = ["jump,sample,mode,margin_pi,margin_lp,moment_residual"]
    for s in samples:
        lines.append(f"{s.jump},{s.sample},{s.mode},{s.margin_pi:.9g},{s.margin_lp:.9g},"
                     f"{s.moment_residual:.9g}")
    return "\n".join(lines) + "\n"
