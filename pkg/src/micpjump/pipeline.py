"""End-to-end planning: build, solve, then make the flight phases exact.

The relaxed model replaces ``v * T`` by McCormick envelopes and ``T**2`` by
a piecewise-affine interpolant, so its touchdown can drift from true
ballistic flight.  Refinement rebuilds the model with the flight time
restricted to a fine grid, where both products are exact, and solves it with
the relaxed solution's cell and foothold choices held fixed, releasing them
in stages if that fails.
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from . import solve as S
from . import transcribe as tr

log = logging.getLogger(__name__)


@dataclasses.dataclass
class PlanOutcome:
    plan: tr.JumpPlan | None
    model: tr.MicpModel
    result: S.MilpResult
    relaxed_result: S.MilpResult
    refined: str               # refinement stage, "" when the relaxed plan was kept

    @property
    def feasible(self):
        return self.plan is not None


def time_grid(scenario: tr.Scenario, step=0.0125):
    lo, hi = scenario.t_air
    n = int(np.floor((hi - lo) / step + 1e-9))
    g = lo + step * np.arange(n + 1)
    if hi - g[-1] > 1e-9:
        g = np.r_[g, hi]
    return np.round(g, 12)


STAGES = (("B_cs", "B_fp", "B_land"), ("B_cs", "B_fp"), ("B_fp",))


def _binary_columns(model: tr.MicpModel, roles):
    cols = []
    r = model.roles
    for role in roles:
        v = r.get(role)
        if v is None:
            continue
        if isinstance(v, dict):
            for j in sorted(v):
                cols.extend(np.ravel(v[j]).tolist())
        else:
            cols.extend(np.ravel(v).tolist())
    return cols


def fix_binaries(target: tr.MicpModel, source: tr.MicpModel, x, roles=STAGES[0]):
    """Copy of ``target`` with the binaries of ``roles`` pinned to ``x``."""
    lb, ub = target.lb.copy(), target.ub.copy()
    for col in _binary_columns(source, roles):
        k = target.index(source.var_names[col])
        lb[k] = ub[k] = float(np.rint(x[col]))
    return dataclasses.replace(target, lb=lb, ub=ub)


def refine(scenario, robot, cells, model, x, params, backend, step=0.0125):
    """Exact-flight solution near ``x``: ``(model, result, stage)`` or ``None``.

    Stages pin fewer and fewer of the relaxed binaries (cells, footholds and
    landing cell; then cells and footholds; then footholds) before the exact
    model is finally solved with every binary free.
    """
    grid = time_grid(scenario, step)
    exact = tr.build(scenario, robot, cells, t_air_fixed=[grid] * scenario.n_jumps)
    for roles in STAGES:
        r = S.solve_model(fix_binaries(exact, model, x, roles), params, backend)
        if r.has_solution:
            return exact, r, "fixed:" + "+".join(roles)
    r = S.solve_model(exact, params, backend)
    if r.has_solution:
        return exact, r, "free"
    return None


def plan(scenario: tr.Scenario, robot, cells, params: S.SolverParams = S.SolverParams(),
         backend="external", exact=True, grid_step=0.0125) -> PlanOutcome:
    """Solve the scenario; the outcome's ``plan`` is ``None`` when infeasible."""
    model = tr.build(scenario, robot, cells)
    relaxed = S.solve_model(model, params, backend)
    if not relaxed.has_solution:
        return PlanOutcome(None, model, relaxed, relaxed, "")
    final_model, final, how = model, relaxed, ""
    if exact:
        out = refine(scenario, robot, cells, model, relaxed.x, params, backend, grid_step)
        if out is None:
            log.warning("no exact-flight plan found; keeping the relaxed plan")
        else:
            final_model, final, how = out
    stats = {"relaxed_objective": relaxed.objective, "relaxed_bound": relaxed.bound,
             "refinement": how or "none", "relaxed_nodes": relaxed.nodes,
             "n_vars": model.n_vars, "n_binary": model.n_binary, "n_rows": model.n_rows,
             "backend": backend}
    status = final.status
    if how.startswith("fixed") and status == "optimal":
        # optimal only among plans sharing the pinned binaries
        status = "feasible"
    p = tr.plan_from_solution(final_model, final.x, scenario, robot, status,
                              final.objective, stats)
    return PlanOutcome(p, final_model, final, relaxed, how)
