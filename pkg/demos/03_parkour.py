"""Two jumps over a gap, using a small platform as a stepping stone.

Run:  python3 demos/03_parkour.py
Takes a few minutes: the model also chooses between double and single stance.
"""
from pathlib import Path

import numpy as np

from micpjump import pipeline
from micpjump import verify as V
from micpjump.cli import load_cells
from micpjump.scenario_file import load

scenario_path = Path(__file__).resolve().parents[1] / "src/micpjump/scenarios/parkour.scn"
sf = load(scenario_path)
cells = load_cells(sf)
for k, seg in enumerate(sf.scenario.terrain, 1):
    print(f"segment {k}: x in [{seg.x0}, {seg.x1}], height {seg.z0}")

out = pipeline.plan(sf.scenario, sf.robot, cells)
B_fp = np.rint(out.result.x[out.model.roles["B_fp"]]).astype(int)
print("foothold binaries (rows: segments, columns: jumps)")
print(B_fp)
for j, jr in enumerate(out.plan.jumps, 1):
    modes = {c.id: c.mode.value for c in cells}
    stance = [modes[i] for i in jr.cells]
    print(f"jump {j}: stance modes {stance}")
    print(f"        lands on segment {jr.segment + 1} after {jr.t_air:.3f} s")

report = V.audit(out.plan, sf.robot, cells, sf.scenario)
print("verification:", "PASS" if report.passed else "FAIL")
