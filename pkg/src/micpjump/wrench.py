"""Feasible force and wrench polytopes.

Wrenches are ``(fx, fz, tau_y)`` about the CoM.  The moment of a contact
force ``f`` applied at offset ``r`` from the CoM is ``r_z f_x - r_x f_z``
(rotation about +y, the same sense as the pitch angle).
"""
from __future__ import annotations

import hashlib
import logging
import os
import tempfile
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from . import geometry
from .geometry import ConvexPolytope
from .robot import (LEGS, Cell, RobotModel, StanceMode, foot_position, in_cspace,
                    leg_angles, leg_jacobian)

log = logging.getLogger(__name__)

CACHE_ENV = "MICPJUMP_CACHE"


class WrenchError(ValueError):
    pass


class WrenchSample(NamedTuple):
    fx: float
    fz: float
    tau_y: float


def wedge(r, f):
    """Pitch moment of force ``f`` applied at CoM offset ``r``."""
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    return r[..., 1] * f[..., 0] - r[..., 0] * f[..., 1]


def moment_arm(q, leg, model: RobotModel):
    """Vector from the CoM to the contact point of ``leg``."""
    return foot_position(leg, model) - np.asarray(q[:2], dtype=float)


def ffp_rows(J, model: RobotModel):
    """Inequality rows of the feasible force set for Jacobian ``J``."""
    mu = model.mu
    A = np.vstack([J.T, -J.T,
                   [[1.0, -mu], [-1.0, -mu], [0.0, -1.0]]])
    b = np.r_[np.full(4, model.tau_max), 0.0, 0.0, 0.0]
    return A, b


def ffp(q, leg, model: RobotModel, tol=geometry.DEFAULT_TOL) -> ConvexPolytope:
    """Contact forces one stance leg can exert at configuration ``q``.

    Joint torques ``J^T f`` are bounded by ``tau_max`` and the force lies in
    the friction cone of the horizontal terrain.
    """
    J = leg_jacobian(leg_angles(q, leg, model), model)
    A, b = ffp_rows(J, model)
    return geometry.hrep_to_vrep(ConvexPolytope(2, A, b, tol=tol))


def fwp_leg(q, leg, model: RobotModel, tol=geometry.DEFAULT_TOL) -> ConvexPolytope:
    F = ffp(q, leg, model, tol)
    r = moment_arm(q, leg, model)
    W = np.column_stack([F.V, wedge(r, F.V)])
    return geometry.vrep_to_hrep(ConvexPolytope(3, V=W, tol=tol))


def fwp_config(q, model: RobotModel, tol=geometry.DEFAULT_TOL) -> ConvexPolytope:
    """Wrenches both legs can produce together in double stance."""
    mode = in_cspace(q, model)
    if mode != StanceMode.DOUBLE:
        raise WrenchError(f"configuration {tuple(q)} is not in double stance ({mode})")
    return geometry.minkowski_sum(fwp_leg(q, "back", model, tol), fwp_leg(q, "front", model, tol))


def _fwp_config_unchecked(q, model, tol):
    return geometry.minkowski_sum(fwp_leg(q, "back", model, tol), fwp_leg(q, "front", model, tol))


def fwp_cell(cell: Cell, model: RobotModel, tol=geometry.DEFAULT_TOL):
    """Representative wrench polytope of a cell.

    Double stance: the wrenches achievable at all four tetrahedron vertices.
    Single stance: the contact leg's wrench set at the cell's Chebyshev
    center.  Returns ``None`` when the intersection is empty.
    """
    if cell.mode == StanceMode.DOUBLE:
        parts = [_fwp_config_unchecked(v, model, tol) for v in cell.vertices]
        P = geometry.intersect(parts, tol=tol)
        if P.empty:
            log.warning("cell %d has an empty wrench polytope; excluded", cell.id)
            return None
        return geometry.hrep_to_vrep(P)
    if cell.mode in (StanceMode.BACK, StanceMode.FRONT):
        center, _ = geometry.chebyshev_center(cell.geo)
        return fwp_leg(center, cell.mode.value, model, tol)
    raise WrenchError(f"no wrench polytope for mode {cell.mode}")


def attach_fwps(cells, model: RobotModel, tol=geometry.DEFAULT_TOL):
    """Cells with their wrench polytopes; wrench-infeasible cells dropped."""
    out = []
    for c in cells:
        P = fwp_cell(c, model, tol)
        if P is not None:
            out.append(c.with_fwp(P))
    return out


def decompose_wrench(F, q, model: RobotModel, legs=LEGS):
    """Split a net wrench among the stance legs.

    Solves a small LP minimizing the largest joint torque subject to the
    friction cone of every stance leg and the wrench balance.  Returns
    ``(forces, torque)`` where ``forces`` maps leg name to its contact force
    and ``torque`` is the resulting ``max |tau|``; ``(None, inf)`` when no
    friction-feasible split exists.
    """
    F = np.asarray(F, dtype=float)
    legs = tuple(legs)
    n = 2 * len(legs)
    mu = model.mu
    A_ub, b_ub = [], []
    A_eq = np.zeros((3, n + 1))
    for k, leg in enumerate(legs):
        J = leg_jacobian(leg_angles(q, leg, model), model)
        r = moment_arm(q, leg, model)
        sl = slice(2 * k, 2 * k + 2)
        for row in np.vstack([J.T, -J.T]):
            a = np.zeros(n + 1)
            a[sl] = row
            a[-1] = -1.0
            A_ub.append(a)
            b_ub.append(0.0)
        for row in ([1.0, -mu], [-1.0, -mu], [0.0, -1.0]):
            a = np.zeros(n + 1)
            a[sl] = row
            A_ub.append(a)
            b_ub.append(0.0)
        A_eq[0, 2 * k] = 1.0
        A_eq[1, 2 * k + 1] = 1.0
        A_eq[2, sl] = [r[1], -r[0]]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=A_eq, b_eq=F,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        return None, float("inf")
    forces = {leg: res.x[2 * k:2 * k + 2] for k, leg in enumerate(legs)}
    return forces, float(res.x[-1])


# ---------------------------------------------------------------------------
# on-disk cache


def cache_dir():
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "micpjump"))


def cache_key(model: RobotModel, cells) -> str:
    h = hashlib.sha256()
    h.update(model.content_hash().encode())
    for c in cells:
        h.update(f"{c.id} {c.mode.value} ".encode())
        h.update(np.ascontiguousarray(c.vertices, dtype=float).tobytes())
    return h.hexdigest()[:24]


def fwp_cache_dumps(cells) -> str:
    parts = []
    for c in cells:
        parts.append(f"FWP {c.id} {c.mode.value}\n")
        parts.append(geometry.dumps(c.fwp))
    return "".join(parts)


def fwp_cache_loads(text: str, cells):
    """Attach cached polytopes to ``cells``; cells absent from the text drop."""
    blocks = {}
    cur = None
    for ln in text.splitlines():
        if ln.startswith("FWP "):
            _, cid, mode = ln.split()
            cur = blocks.setdefault(int(cid), [])
        elif ln.strip():
            cur.append(ln)
    out = []
    for c in cells:
        if c.id in blocks:
            out.append(c.with_fwp(geometry.loads(blocks[c.id], 3)))
    return out


def cached_fwps(cells, model: RobotModel, directory=None):
    """Cells with wrench polytopes, loading from or writing to the cache."""
    directory = Path(directory) if directory is not None else cache_dir()
    path = directory / f"fwp-{cache_key(model, cells)}.txt"
    if path.exists():
        return fwp_cache_loads(path.read_text(), cells)
    out = attach_fwps(cells, model)
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fwp-", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(fwp_cache_dumps(out))
    os.replace(tmp, path)
    return out
