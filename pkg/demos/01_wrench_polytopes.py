"""From joint torque limits to a cell's feasible wrench polytope.

Run:  python3 demos/01_wrench_polytopes.py
"""
import numpy as np

from micpjump import geometry as G
from micpjump import wrench as W
from micpjump.robot import RobotModel, StanceMode, discretize_cspace

robot = RobotModel(q_min=(-0.06, 0.14, -0.1), q_max=(0.06, 0.24, 0.1))
nominal = np.array([0.0, 0.18, 0.0])

# One leg: the torque box |J^T f| <= tau_max, clipped by the friction cone,
# gives a polygon of foot forces.  Lifted by the moment arm it becomes a flat
# polygon in (fx, fz, tau_y).
front = W.fwp_leg(nominal, "front", robot)
print(f"front-leg wrench polygon: {len(front.V)} vertices")

# Both feet on the ground: the wrench set is the Minkowski sum of the legs.
both = W.fwp_config(nominal, robot)
mg = robot.m * robot.g
print(f"double-stance polytope: {len(both.V)} vertices, {len(both.A)} facets")
print(f"holds its own weight (0, {mg:.2f}, 0):", G.contains(both, [0.0, mg, 0.0]))

# A C-space cell is a tetrahedron of body poses.  Its wrench polytope is the
# set of wrenches every corner pose can produce, so any wrench picked for the
# cell stays achievable wherever the body is inside it.
cells = discretize_cspace(robot, {StanceMode.DOUBLE: 21}, grid=(2, 2, 1))
cells = W.cached_fwps(cells, robot)
cell = next(c for c in cells if G.contains(c.geo, nominal))
print(f"nominal pose lies in cell {cell.id}; its wrench polytope has {len(cell.fwp.V)} vertices")

rng = np.random.default_rng(0)
F = rng.dirichlet(np.ones(len(cell.fwp.V))) @ cell.fwp.V
print("random cell wrench:", np.round(F, 3))
for v in cell.vertices:
    forces, tau = W.decompose_wrench(F, v, robot)
    split = ", ".join(f"{leg}={np.round(f, 2)}" for leg, f in forces.items())
    print(f"  at corner {np.round(v, 3)}: {split}, max |tau| {tau:.2f} <= {robot.tau_max}")
