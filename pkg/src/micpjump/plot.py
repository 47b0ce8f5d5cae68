"""Plain SVG figures: C-space slices and plan overviews.

Coordinates are printed with fixed precision, so identical inputs give
byte-identical files.
"""
from __future__ import annotations

import itertools

import numpy as np

from . import bezier
from .robot import StanceMode

MODE_COLORS = {StanceMode.DOUBLE: "#4c72b0", StanceMode.BACK: "#dd8452",
               StanceMode.FRONT: "#55a868"}


def _f(v):
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


class _Canvas:
    def __init__(self, lo, hi, width=640, pad=0.05):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        span = np.maximum(hi - lo, 1e-9)
        lo, hi = lo - pad * span, hi + pad * span
        self.lo, self.hi = lo, hi
        self.s = width / (hi[0] - lo[0])
        self.w = width
        self.h = max(1.0, (hi[1] - lo[1]) * self.s)
        self.items = []

    def pt(self, x, z):
        return self.s * (x - self.lo[0]), self.s * (self.hi[1] - z)

    def path(self, pts, closed=False):
        out = []
        for k, (x, z) in enumerate(pts):
            u, v = self.pt(x, z)
            out.append(("M" if k == 0 else "L") + f"{_f(u)},{_f(v)}")
        return " ".join(out) + (" Z" if closed else "")

    def add(self, s):
        self.items.append(s)

    def svg(self, title=""):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.w)}" '
                f'height="{_f(self.h)}" viewBox="0 0 {_f(self.w)} {_f(self.h)}">')
        lines = [head]
        if title:
            lines.append(f"<title>{title}</title>")
        lines += self.items
        lines.append("</svg>")
        return "\n".join(lines) + "\n"


def tetra_slice(V, theta):
    """Polygon (in x, z) where the plane ``θ = theta`` cuts a tetrahedron."""
    V = np.asarray(V, float)
    pts = []
    for a, b in itertools.combinations(range(4), 2):
        ta, tb = V[a, 2] - theta, V[b, 2] - theta
        if abs(ta) < 1e-12:
            pts.append(V[a, :2])
        if abs(tb) < 1e-12:
            pts.append(V[b, :2])
        if ta * tb < 0:
            s = ta / (ta - tb)
            pts.append(V[a, :2] + s * (V[b, :2] - V[a, :2]))
    if len(pts) < 3:
        return np.zeros((0, 2))
    P = np.unique(np.round(np.array(pts), 12), axis=0)
    if len(P) < 3:
        return np.zeros((0, 2))
    c = P.mean(axis=0)
    order = np.argsort(np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0]))
    return P[order]


def cspace_slice_svg(cells, theta, model, mark=None):
    """θ-slice of the cell partition, one filled polygon per cut cell."""
    canvas = _Canvas((model.q_min[0], model.q_min[1]), (model.q_max[0], model.q_max[1]))
    canvas.add(f'<path d="{canvas.path([(model.q_min[0], model.q_min[1]), (model.q_max[0], model.q_min[1]), (model.q_max[0], model.q_max[1]), (model.q_min[0], model.q_max[1])], True)}" '
               'fill="none" stroke="#999999" stroke-width="1"/>')
    for c in cells:
        P = tetra_slice(c.vertices, theta)
        if len(P):
            canvas.add(f'<path class="cell" data-id="{c.id}" data-mode="{c.mode.value}" '
                       f'd="{canvas.path(P, True)}" fill="{MODE_COLORS[c.mode]}" '
                       'fill-opacity="0.6" stroke="#222222" stroke-width="0.5"/>')
    if mark is not None:
        u, v = canvas.pt(*mark)
        canvas.add(f'<circle class="mark" cx="{_f(u)}" cy="{_f(v)}" r="4" fill="#c44e52"/>')
    return canvas.svg(f"theta = {theta:.4f}")


def _stance_samples(plan, robot, per_stance=41):
    out = []
    t = np.linspace(0.0, plan.T_st, per_stance)
    for jr in plan.jumps:
        a_qd, a_q = bezier.stance_coefficients(jr.alpha_F, jr.q0, jr.qd0, plan.T_st,
                                               robot.D, robot.a_g)
        q = bezier.evaluate(bezier.BezierCurve(a_q, plan.T_st), t) + jr.frame
        out.append(q)
    return out


def plan_svg(plan, scenario, robot, flight_samples=40, force_scale=0.004):
    """Terrain, goal, CoM path (stance solid, flight dashed), frames and GRFs."""
    segs = scenario.terrain
    pts = [(s.x0, s.z0) for s in segs] + [(s.x1, s.z_at(s.x1)) for s in segs]
    stances = _stance_samples(plan, robot) if plan is not None else []
    flights = []
    if plan is not None:
        for jr, st in zip(plan.jumps, stances):
            v = jr.qd_end
            t = np.linspace(0.0, jr.t_air, flight_samples + 1)
            q = st[-1] + np.outer(t, v) + 0.5 * np.outer(t ** 2, robot.a_g)
            flights.append(q)
    for arr in stances + flights:
        pts.extend(map(tuple, arr[:, :2]))
    P = np.array(pts)
    lo = P.min(axis=0)
    hi = np.maximum(P.max(axis=0), lo + 0.1)
    canvas = _Canvas(lo, hi, width=800, pad=0.08)
    for k, s in enumerate(segs):
        canvas.add(f'<path class="terrain" data-segment="{k + 1}" '
                   f'd="{canvas.path([(s.x0, s.z0), (s.x1, s.z_at(s.x1))])}" '
                   'stroke="#333333" stroke-width="3" fill="none"/>')
    g = scenario.goal
    gs = segs[g.segment]
    canvas.add(f'<path class="goal" d="{canvas.path([(g.x_lo, gs.z_at(g.x_lo)), (g.x_hi, gs.z_at(g.x_hi))])}" '
               'stroke="#2ca02c" stroke-width="7" stroke-opacity="0.5" fill="none"/>')
    if plan is None:
        return canvas.svg("terrain")
    t_samp = bezier.sample_times(plan.N_t, plan.T_st)
    for j, (jr, st, fl) in enumerate(zip(plan.jumps, stances, flights), 1):
        canvas.add(f'<path class="stance" data-jump="{j}" d="{canvas.path(st[:, :2])}" '
                   'stroke="#1f77b4" stroke-width="2" fill="none"/>')
        canvas.add(f'<path class="flight" data-jump="{j}" d="{canvas.path(fl[:, :2])}" '
                   'stroke="#1f77b4" stroke-width="2" stroke-dasharray="6,4" fill="none"/>')
        q, _, F = _closed_form(jr, plan, robot, t_samp)
        for qi, Fi in zip(q + jr.frame, F):
            tip = qi[:2] + force_scale * Fi[:2]
            canvas.add(f'<path class="grf" d="{canvas.path([qi[:2], tip])}" '
                       'stroke="#d62728" stroke-width="1.2" fill="none"/>')
    frames = [jr.frame for jr in plan.jumps] + [plan.jumps[-1].q_td] if plan.jumps else []
    for k, fr in enumerate(frames):
        a, b = robot.L / 2 * np.array([np.cos(fr[2]), -np.sin(fr[2])]), np.asarray(fr[:2])
        canvas.add(f'<path class="frame" data-index="{k}" d="{canvas.path([b - a, b + a])}" '
                   'stroke="#9467bd" stroke-width="2" fill="none"/>')
        u, v = canvas.pt(*b)
        canvas.add(f'<circle class="frame" cx="{_f(u)}" cy="{_f(v)}" r="3" fill="#9467bd"/>')
    return canvas.svg(f"plan, {plan.n_jumps} jump(s)")


def _closed_form(jr, plan, robot, times):
    a_qd, a_q = bezier.stance_coefficients(jr.alpha_F, jr.q0, jr.qd0, plan.T_st, robot.D,
                                           robot.a_g)
    q = bezier.evaluate(bezier.BezierCurve(a_q, plan.T_st), times)
    F = bezier.evaluate(bezier.BezierCurve(jr.alpha_F, plan.T_st), times)
    return q, None, F
