"""Command line entry point: ``micpjump <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 infeasible scenario,
3 no plan within the solver limits or a refused input, 4 malformed input.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bezier, pipeline, plot, solve, verify
from . import transcribe as tr
from .robot import cells_dumps, discretize_cspace
from .scenario_file import ScenarioFileError, load
from .wrench import cached_fwps

log = logging.getLogger("micpjump")


def load_cells(sf, cache_dir=None, with_fwp=True):
    cells = discretize_cspace(sf.robot, sf.resolution, grid=sf.grid)
    return cached_fwps(cells, sf.robot, cache_dir) if with_fwp else cells


def trajectory_csv(plan, robot, rate):
    """Global-frame samples of every stance and flight, flight wrench zero."""
    rows = []
    t0 = 0.0
    for jr in plan.jumps:
        st = bezier.trajectory_csv_rows(jr.alpha_F, jr.q0, jr.qd0, plan.T_st, robot.D,
                                        robot.a_g, rate, t0, jr.frame)
        rows.append(st)
        t0 += plan.T_st
        n = max(1, int(round(jr.t_air * rate)))
        t = np.linspace(0.0, jr.t_air, n + 1)[1:]
        q_to, v = st[-1, 4:7], jr.qd_end
        q = q_to + np.outer(t, v) + 0.5 * np.outer(t ** 2, robot.a_g)
        qd = v + np.outer(t, robot.a_g)
        rows.append(np.column_stack([t0 + t, np.zeros((n, 3)), q, qd]))
        t0 += jr.t_air
    head = "t,fx,fz,tau_y,x,z,theta,xd,zd,thetad"
    if not rows:
        return head + "\n"
    data = np.vstack(rows)
    return head + "\n" + "\n".join(",".join(format(v, ".10g") for v in r) for r in data) + "\n"


def _params(a):
    return solve.SolverParams(gap=a.gap, time_limit=a.time_limit, node_limit=a.node_limit,
                              threads=a.threads)


# ---------------------------------------------------------------------------
# commands


def cmd_cspace(a):
    sf = load(a.scenario)
    cells = load_cells(sf, with_fwp=False)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "cells.txt").write_text(cells_dumps(cells))
    r = sf.robot
    init = sf.scenario.init
    mark = 0.5 * (np.asarray(init.q_lo) + np.asarray(init.q_hi))
    for k, th in enumerate(np.linspace(r.q_min[2], r.q_max[2], a.slices)):
        th = 0.0 if abs(th) < 1e-12 else float(th)
        (out / f"cspace_slice_{k}.svg").write_text(
            plot.cspace_slice_svg(cells, th, r, mark[:2] if abs(th - mark[2]) < 1e-9 else None))
    print(f"{len(cells)} cells written to {out / 'cells.txt'}")
    return 0


def cmd_fwp_cache(a):
    sf = load(a.scenario)
    t = time.perf_counter()
    cells = load_cells(sf, a.cache_dir)
    nv = sum(len(c.fwp.V) for c in cells)
    print(f"{len(cells)} cell wrench polytopes ready ({nv} vertices, "
          f"{time.perf_counter() - t:.1f} s)")
    return 0


def cmd_export_mps(a):
    sf = load(a.scenario)
    cells = load_cells(sf, a.cache_dir)
    model = tr.build(sf.scenario, sf.robot, cells)
    solve.export_mps(model, a.out)
    print(f"{model.n_vars} variables ({model.n_binary} binary), {model.n_rows} rows "
          f"written to {a.out}")
    return 0


def cmd_plan(a):
    sf = load(a.scenario)
    cells = load_cells(sf, a.cache_dir)
    if a.export_mps:
        model = tr.build(sf.scenario, sf.robot, cells)
        solve.export_mps(model, a.export_mps)
        print(f"model written to {a.export_mps}")
        if a.no_solve:
            return 0
    t = time.perf_counter()
    out = pipeline.plan(sf.scenario, sf.robot, cells, _params(a), backend=a.backend,
                        exact=not a.relaxed_only)
    dt = time.perf_counter() - t
    st = out.relaxed_result.status
    if not out.feasible:
        if st == "infeasible":
            print("infeasible: the branch-and-bound search proved that no plan satisfies "
                  "the scenario constraints")
            return 2
        print(f"no plan found ({st}) within the solver limits")
        return 3
    Path(a.out).write_text(tr.plan_dumps(out.plan))
    if a.csv:
        Path(a.csv).write_text(trajectory_csv(out.plan, sf.robot, a.rate))
    if a.solution:
        Path(a.solution).write_text(solve.solution_dumps(out.model, out.result))
    p = out.plan
    print(f"status {p.status}, objective {p.objective:.6g}, refinement "
          f"{out.refined or 'none'}, {dt:.1f} s")
    for j, jr in enumerate(p.jumps, 1):
        print(f"jump {j}: lands on segment {jr.segment + 1} at x = {jr.q_td[0]:.4f}, "
              f"flight {jr.t_air:.4f} s")
    return 0


def cmd_verify(a):
    sf = load(a.scenario)
    try:
        plan = tr.plan_loads(Path(a.plan).read_text())
    except tr.PlanFormatError as exc:
        print(f"{a.plan}: {exc}", file=sys.stderr)
        return 4
    if plan.robot_hash != sf.robot.content_hash():
        print(f"refusing to verify: plan robot hash {plan.robot_hash or '(none)'} does not "
              f"match scenario robot hash {sf.robot.content_hash()}", file=sys.stderr)
        return 3
    cells = load_cells(sf, a.cache_dir)
    rep = verify.audit(plan, sf.robot, cells, sf.scenario, tol=a.tol)
    torques = verify.torque_audit(plan, sf.robot, cells)
    text = rep.to_text()
    lp = [s.margin_lp for s in torques]
    pi = [s.margin_pi for s in torques if not math.isnan(s.margin_pi)]
    extra = []
    if lp:
        extra.append(f"INFO torque_margin_decomposition {min(lp):.6g}")
    if pi:
        extra.append(f"INFO torque_margin_min_norm {min(pi):.6g}")
    single = [s.moment_residual for s in torques if s.mode != "double"]
    if single:
        extra.append(f"INFO single_stance_moment_residual {max(single):.6g}")
    lines = text.rstrip("\n").split("\n")
    text = "\n".join(lines[:-1] + extra + lines[-1:]) + "\n"
    print(text, end="")
    if a.csv:
        Path(a.csv).write_text(rep.to_csv())
    if a.torque_csv:
        Path(a.torque_csv).write_text(verify.torque_text(torques))
    return 0 if rep.passed else 1


def cmd_plot(a):
    sf = load(a.scenario)
    plan = None
    if a.plan:
        plan = tr.plan_loads(Path(a.plan).read_text())
        if not plan.jumps:
            plan = None
    Path(a.out).write_text(plot.plan_svg(plan, sf.scenario, sf.robot))
    return 0


# ---------------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="micpjump",
                                description="Jump planning for a planar two-legged robot.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario file")
        sp.add_argument("--cache-dir", default=None,
                        help="wrench polytope cache (default: $MICPJUMP_CACHE)")

    sp = sub.add_parser("cspace", help="discretize the C-space and draw θ slices")
    common(sp)
    sp.add_argument("-o", "--out", required=True, help="output directory")
    sp.add_argument("--slices", type=int, default=5)
    sp.set_defaults(func=cmd_cspace)

    sp = sub.add_parser("fwp-cache", help="compute or load the cell wrench polytopes")
    common(sp)
    sp.set_defaults(func=cmd_fwp_cache)

    sp = sub.add_parser("plan", help="solve a scenario")
    common(sp)
    sp.add_argument("-o", "--out", default="plan.txt")
    sp.add_argument("--csv", help="trajectory CSV path")
    sp.add_argument("--rate", type=float, default=500.0, help="CSV samples per second")
    sp.add_argument("--gap", type=float, default=1e-4)
    sp.add_argument("--time-limit", type=float, default=None)
    sp.add_argument("--node-limit", type=int, default=None)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--backend", choices=("external", "reference"), default="external")
    sp.add_argument("--relaxed-only", action="store_true",
                    help="skip the exact-flight refinement")
    sp.add_argument("--solution", help="write the raw column values of the final model")
    sp.add_argument("--export-mps", help="also write the model as MPS")
    sp.add_argument("--no-solve", action="store_true", help="with --export-mps, stop there")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("verify", help="audit a plan against its scenario")
    sp.add_argument("plan")
    common(sp)
    sp.add_argument("--tol", type=float, default=verify.TOL)
    sp.add_argument("--csv", help="residual trace CSV path")
    sp.add_argument("--torque-csv", help="torque margin CSV path")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("plot", help="draw a plan as SVG")
    sp.add_argument("plan", nargs="?", default=None)
    common(sp)
    sp.add_argument("-o", "--out", required=True)
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("export-mps", help="write the planning model as MPS")
    common(sp)
    sp.add_argument("-o", "--out", required=True)
    sp.set_defaults(func=cmd_export_mps)
    return p


def main(argv=None):
    a = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except ScenarioFileError as exc:
        print(str(exc), file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"{exc.filename}: no such file", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
