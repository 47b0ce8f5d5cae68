"""Planar two-legged robot: leg kinematics, C-space and its discretization.

Conventions
-----------
* Configurations ``q = (x, z, theta)`` are CoM position and pitch in the
  stance frame, whose origin is the midpoint between the two feet.  Feet sit
  at ``(-L/2, 0)`` (back) and ``(+L/2, 0)`` (front); the terrain normal in
  this frame is ``(0, 1)``.
* Pitch is a rotation about +y, which points into the sagittal plane, so a
  positive ``theta`` lowers the front hip and raises the back hip.
* Hips sit at the torso ends, ``CoM +/- (L/2)(cos theta, -sin theta)``.
* Leg angles: the hip angle is the absolute thigh angle measured from the
  downward vertical, positive toward +x.  The knee angle is the flexion
  between thigh and shank; it is positive on the knee-back branch (knee
  behind the hip-foot line) and negative on the knee-forward branch.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import itertools
import logging
import math
from typing import NamedTuple

import numpy as np

from . import geometry

log = logging.getLogger(__name__)

LEGS = ("back", "front")


class KinematicsError(ValueError):
    pass


class StanceMode(str, enum.Enum):
    BACK = "back"
    DOUBLE = "double"
    FRONT = "front"
    AERIAL = "aerial"


class Configuration(NamedTuple):
    x: float
    z: float
    theta: float


@dataclasses.dataclass(frozen=True)
class RobotModel:
    """Physical parameters of the planar robot.

    Defaults are the hardware values plus the free choices for friction,
    leg-extension limits and the configuration box.
    """

    m: float = 2.56
    I_theta: float = 0.04
    L: float = 0.3
    l_thigh: float = 0.14
    l_shank: float = 0.14
    tau_max: float = 9.8
    mu: float = 0.7
    r_min: float = 0.10
    r_max: float = 0.27
    q_min: tuple = (-0.15, 0.12, -0.6)
    q_max: tuple = (0.15, 0.27, 0.6)
    knee_branch: tuple = ("back", "back")
    g: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "q_min", tuple(float(v) for v in self.q_min))
        object.__setattr__(self, "q_max", tuple(float(v) for v in self.q_max))
        object.__setattr__(self, "knee_branch", tuple(self.knee_branch))
        for name in ("m", "I_theta", "L", "l_thigh", "l_shank", "tau_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if not 0 < self.r_min < self.r_max <= self.l_thigh + self.l_shank:
            raise ValueError("need 0 < r_min < r_max <= l_thigh + l_shank")
        if len(self.q_min) != 3 or any(a >= b for a, b in zip(self.q_min, self.q_max)):
            raise ValueError("q_min must be below q_max componentwise")
        for br in self.knee_branch:
            if br not in ("back", "forward"):
                raise ValueError(f"unknown knee branch {br!r}")

    @property
    def D(self):
        return np.diag([self.m, self.m, self.I_theta])

    @property
    def a_g(self):
        return np.array([0.0, -self.g, 0.0])

    def branch(self, leg):
        return self.knee_branch[LEGS.index(leg)]

    def content_hash(self):
        text = repr(dataclasses.astuple(self))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _leg_index(leg):
    if leg not in LEGS:
        raise ValueError(f"leg must be 'back' or 'front', got {leg!r}")
    return LEGS.index(leg)


def hip_position(q, leg, model: RobotModel):
    x, z, th = q
    s = 1.0 if leg == "front" else -1.0
    return np.array([x + s * model.L / 2 * math.cos(th), z - s * model.L / 2 * math.sin(th)])


def foot_position(leg, model: RobotModel):
    s = 1.0 if leg == "front" else -1.0
    return np.array([s * model.L / 2, 0.0])


def _u(phi):
    return np.array([math.sin(phi), -math.cos(phi)])


def leg_ik(hip, foot, branch, model: RobotModel):
    """Hip and knee angles placing the foot at ``foot`` from ``hip``."""
    hip = np.asarray(hip, dtype=float)
    d = np.asarray(foot, dtype=float) - hip
    r = float(np.hypot(*d))
    l1, l2 = model.l_thigh, model.l_shank
    if r > l1 + l2 + 1e-12 or r < abs(l1 - l2) - 1e-12 or r == 0:
        raise KinematicsError(f"foot out of reach (distance {r:.6g} m)")
    cos_int = np.clip((l1 * l1 + l2 * l2 - r * r) / (2 * l1 * l2), -1.0, 1.0)
    flex = math.pi - math.acos(cos_int)
    beta = math.acos(np.clip((l1 * l1 + r * r - l2 * l2) / (2 * l1 * r), -1.0, 1.0))
    psi = math.atan2(d[0], -d[1])
    if branch == "back":
        return psi - beta, flex
    if branch == "forward":
        return psi + beta, -flex
    raise ValueError(f"unknown knee branch {branch!r}")


def leg_points(hip, angles, model: RobotModel):
    """Knee and foot positions for given hip position and leg angles."""
    phi, knee = angles
    hip = np.asarray(hip, dtype=float)
    p_knee = hip + model.l_thigh * _u(phi)
    return p_knee, p_knee + model.l_shank * _u(phi + knee)


def leg_fk(q, leg, model: RobotModel):
    """Hip, knee and foot positions of a stance leg at configuration ``q``.

    The foot is pinned to its contact point; the knee follows the model's
    branch for this leg.
    """
    _leg_index(leg)
    hip = hip_position(q, leg, model)
    foot = foot_position(leg, model)
    angles = leg_ik(hip, foot, model.branch(leg), model)
    knee, _ = leg_points(hip, angles, model)
    return hip, knee, foot


def leg_jacobian(angles, model: RobotModel):
    """Foot velocity relative to the hip per unit (hip, knee) joint rate."""
    phi, knee = angles
    l1, l2 = model.l_thigh, model.l_shank
    du1 = np.array([math.cos(phi), math.sin(phi)])
    du2 = np.array([math.cos(phi + knee), math.sin(phi + knee)])
    return np.column_stack([l1 * du1 + l2 * du2, l2 * du2])


def leg_angles(q, leg, model: RobotModel):
    return leg_ik(hip_position(q, leg, model), foot_position(leg, model), model.branch(leg), model)


def leg_feasible(q, leg, model: RobotModel) -> bool:
    """Terrain clearance and extension limits for one stance leg."""
    hip = hip_position(q, leg, model)
    foot = foot_position(leg, model)
    r = float(np.hypot(*(hip - foot)))
    if not model.r_min <= r <= model.r_max:
        return False
    if hip[1] < 0:
        return False
    knee, _ = leg_points(hip, leg_ik(hip, foot, model.branch(leg), model), model)
    return bool(knee[1] >= 0)


def in_box(q, model: RobotModel) -> bool:
    return all(lo <= v <= hi for v, lo, hi in zip(q, model.q_min, model.q_max))


def in_cspace(q, model: RobotModel):
    """Stance mode of ``q`` (double stance preferred), or ``None`` outside."""
    if not in_box(q, model):
        return None
    back = leg_feasible(q, "back", model)
    front = leg_feasible(q, "front", model)
    if back and front:
        return StanceMode.DOUBLE
    if front:
        return StanceMode.FRONT
    if back:
        return StanceMode.BACK
    return None


def classify(Q, model: RobotModel):
    """Vectorized :func:`in_cspace` over an ``(n, 3)`` array.

    Returns an integer array: 0 outside, 1 back, 2 double, 3 front.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    x, z, th = Q.T
    lo, hi = np.array(model.q_min), np.array(model.q_max)
    inbox = np.all((Q >= lo) & (Q <= hi), axis=1)
    ok = {}
    l1, l2 = model.l_thigh, model.l_shank
    for leg in LEGS:
        s = 1.0 if leg == "front" else -1.0
        hx = x + s * model.L / 2 * np.cos(th)
        hz = z - s * model.L / 2 * np.sin(th)
        dx = s * model.L / 2 - hx
        dz = -hz
        r = np.hypot(dx, dz)
        rs = np.where(r > 0, r, 1.0)
        beta = np.arccos(np.clip((l1 * l1 + rs * rs - l2 * l2) / (2 * l1 * rs), -1, 1))
        psi = np.arctan2(dx, -dz)
        phi = psi - beta if model.branch(leg) == "back" else psi + beta
        kz = hz - l1 * np.cos(phi)
        ok[leg] = (r >= model.r_min) & (r <= model.r_max) & (hz >= 0) & (kz >= 0)
    out = np.zeros(len(Q), dtype=int)
    out[ok["back"]] = 1
    out[ok["front"]] = 3
    out[ok["back"] & ok["front"]] = 2
    out[~inbox] = 0
    return out


_MODE_CODE = {StanceMode.BACK: 1, StanceMode.DOUBLE: 2, StanceMode.FRONT: 3}
_CODE_MODE = {v: k for k, v in _MODE_CODE.items()}


@dataclasses.dataclass(frozen=True, eq=False)
class Cell:
    """Tetrahedral C-space cell with one stance mode."""

    id: int
    vertices: np.ndarray
    mode: StanceMode
    geo: geometry.ConvexPolytope
    fwp: geometry.ConvexPolytope | None = None

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    @property
    def volume(self):
        return tetra_volume(self.vertices)

    def with_fwp(self, fwp):
        return dataclasses.replace(self, fwp=fwp)


def tetra_volume(V):
    V = np.asarray(V)
    return abs(float(np.linalg.det(V[1:] - V[0]))) / 6.0


def tetra_polytope(V, tol=geometry.DEFAULT_TOL):
    """H-rep of a tetrahedron: exactly four outward facet rows."""
    V = np.asarray(V, dtype=float)
    A, b = [], []
    for i in range(4):
        f = [V[j] for j in range(4) if j != i]
        n = np.cross(f[1] - f[0], f[2] - f[0])
        n /= np.linalg.norm(n)
        off = n @ f[0]
        if n @ V[i] > off:
            n, off = -n, -off
        A.append(n)
        b.append(off)
    return geometry.ConvexPolytope(3, np.array(A), np.array(b), V=V, tol=tol)


def _kuhn(lo, hi):
    """Six tetrahedra of the Kuhn split of an axis-aligned box."""
    lo, hi = np.asarray(lo), np.asarray(hi)
    span = hi - lo
    tets = []
    for perm in itertools.permutations(range(3)):
        p = np.zeros(3)
        verts = [lo + p * span]
        for ax in perm:
            p = p.copy()
            p[ax] = 1.0
            verts.append(lo + p * span)
        tets.append(np.array(verts))
    return tets


def _box_mode(lo, hi, model, lattice):
    ticks = [np.linspace(a, b, lattice) for a, b in zip(lo, hi)]
    pts = np.array(list(itertools.product(*ticks)))
    codes = classify(pts, model)
    first = codes[0]
    if first == 0 or np.any(codes != first):
        return None
    return int(first)


def _grid_boxes(lo0, hi0, counts):
    edges = [np.linspace(a, b, n + 1) for a, b, n in zip(lo0, hi0, counts)]
    for i, j, k in itertools.product(*(range(n) for n in counts)):
        lo = np.array([edges[0][i], edges[1][j], edges[2][k]])
        hi = np.array([edges[0][i + 1], edges[1][j + 1], edges[2][k + 1]])
        yield lo, hi


def discretize_cspace(model: RobotModel, resolution, grid=None, max_depth=4,
                      lattice=3, nominal=None):
    """Tetrahedral cells inside the C-space, one stance mode per cell.

    The configuration box ``[q_min, q_max]`` is cut into a uniform grid of
    boxes.  A box whose lattice points (corners, edge midpoints and centroid
    for ``lattice=3``) all share one stance mode contributes the six
    tetrahedra of its Kuhn split; mixed boxes are dropped.  Without an
    explicit ``grid`` the box is halved along every axis until each requested
    mode has enough candidates, so the selected tetrahedra are the largest
    available.  Among equal-volume candidates, those in boxes closest to
    ``nominal`` win, which keeps the selection contiguous.

    Parameters
    ----------
    resolution : dict
        Stance mode (``StanceMode`` or its string value) to cell count.
    grid : tuple of int, optional
        Boxes per axis ``(nx, nz, ntheta)``.
    """
    req = {StanceMode(k): int(v) for k, v in resolution.items()}
    for mode, n in req.items():
        if mode == StanceMode.AERIAL:
            raise ValueError("aerial cells are not part of the C-space")
        if n < 1:
            raise ValueError("resolution must be at least 1 per requested region")
    lo0, hi0 = np.array(model.q_min), np.array(model.q_max)
    span0 = hi0 - lo0
    if nominal is None:
        nominal = np.array([0.5 * (lo0[0] + hi0[0]), 0.5 * (lo0[1] + hi0[1]), 0.0])
    nominal = np.asarray(nominal, dtype=float)

    def candidates_for(counts):
        cand = {m: [] for m in req}
        for lo, hi in _grid_boxes(lo0, hi0, counts):
            code = _box_mode(lo, hi, model, lattice)
            if code is None or _CODE_MODE[code] not in cand:
                continue
            box_dist = float(np.linalg.norm((0.5 * (lo + hi) - nominal) / span0))
            for tet in _kuhn(lo, hi):
                cand[_CODE_MODE[code]].append((box_dist, tet))
        return cand

    if grid is not None:
        chosen = candidates_for(tuple(int(n) for n in grid))
    else:
        chosen = {}
        for depth in range(max_depth + 1):
            cand = candidates_for((2 ** depth,) * 3)
            for mode in req:
                if mode not in chosen and len(cand[mode]) >= req[mode]:
                    chosen[mode] = cand[mode]
            if len(chosen) == len(req):
                break
        for mode in req:
            chosen.setdefault(mode, cand[mode])

    cells = []
    for mode in (StanceMode.DOUBLE, StanceMode.BACK, StanceMode.FRONT):
        if mode not in req:
            continue
        cand = chosen[mode]
        if len(cand) < req[mode]:
            log.warning("only %d %s-stance cells available (requested %d)",
                        len(cand), mode.value, req[mode])
        keys = []
        for k, (box_dist, tet) in enumerate(cand):
            dist = float(np.linalg.norm((tet.mean(axis=0) - nominal) / span0))
            keys.append((-round(tetra_volume(tet), 15), round(box_dist, 12), round(dist, 12), k))
        for *_, k in sorted(keys)[: req[mode]]:
            V = cand[k][1]
            cells.append(Cell(len(cells) + 1, V, mode, tetra_polytope(V)))
    return cells


def cells_dumps(cells) -> str:
    """``CELL id mode (x z theta) x4`` lines."""
    out = []
    for c in cells:
        vs = " ".join("(" + " ".join(format(float(v), ".17g") for v in row) + ")"
                      for row in c.vertices)
        out.append(f"CELL {c.id} {c.mode.value} {vs}")
    return "\n".join(out) + "\n"


def cells_loads(text: str):
    cells = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        head, _, rest = ln.partition("(")
        parts = head.split()
        if parts[0] != "CELL":
            raise ValueError(f"not a CELL line: {ln!r}")
        nums = [float(v) for v in rest.replace("(", " ").replace(")", " ").split()]
        V = np.array(nums).reshape(4, 3)
        cells.append(Cell(int(parts[1]), V, StanceMode(parts[2]), tetra_polytope(V)))
    return cells
