"""Text scenario files.

A scenario file has bracketed sections with ``key = value`` lines, except
``[terrain]``, whose lines are ``x0 x1 z0 slope``.  ``#`` starts a comment.
Vectors are whitespace separated; booleans are ``yes``/``no``.  Terrain
segments are numbered from 1 in the order written, and ``[goal] segment``
uses that numbering.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

from .robot import RobotModel, StanceMode
from .transcribe import OBJECTIVES, Goal, InitSet, Scenario, ScenarioError, Segment


class ScenarioFileError(ValueError):
    def __init__(self, msg, line=None, source="<scenario>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)


@dataclasses.dataclass(frozen=True)
class ScenarioFile:
    robot: RobotModel
    scenario: Scenario
    resolution: dict
    grid: tuple | None
    source: str = "<scenario>"


_ROBOT_FLOATS = ("m", "I_theta", "L", "l_thigh", "l_shank", "tau_max", "mu", "r_min", "r_max", "g")
_PLAN_KEYS = {"name", "n_jumps", "T_st", "N_t", "order", "qd_to_lo", "qd_to_hi", "t_air",
              "pwl_segments", "objective", "mccormick", "support_cuts", "foot_margin",
              "zero_liftoff_wrench"}
_SECTIONS = ("robot", "terrain", "goal", "init", "plan", "discretization")


def _floats(val, n, key, line, src):
    try:
        v = tuple(float(t) for t in val.split())
    except ValueError:
        raise ScenarioFileError(f"{key}: expected numbers, got {val!r}", line, src) from None
    if n is not None and len(v) != n:
        raise ScenarioFileError(f"{key}: expected {n} values, got {len(v)}", line, src)
    return v


def _bool(val, key, line, src):
    v = val.strip().lower()
    if v in ("yes", "true", "1"):
        return True
    if v in ("no", "false", "0"):
        return False
    raise ScenarioFileError(f"{key}: expected yes or no, got {val!r}", line, src)


def loads(text: str, source="<scenario>") -> ScenarioFile:
    sections = {}
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        if ln.startswith("["):
            if not ln.endswith("]"):
                raise ScenarioFileError(f"malformed section header {ln!r}", lineno, source)
            name = ln[1:-1].strip()
            if name not in _SECTIONS:
                raise ScenarioFileError(f"unknown section [{name}]", lineno, source)
            if name in sections:
                raise ScenarioFileError(f"duplicate section [{name}]", lineno, source)
            cur = sections[name] = {"line": lineno, "items": []}
            continue
        if cur is None:
            raise ScenarioFileError("content before the first section", lineno, source)
        cur["items"].append((lineno, ln))

    def kv(name):
        out = {}
        sec = sections.get(name)
        if sec is None:
            return out, None
        for lineno, ln in sec["items"]:
            if "=" not in ln:
                raise ScenarioFileError(f"expected key = value in [{name}]", lineno, source)
            k, v = (s.strip() for s in ln.split("=", 1))
            if k in out:
                raise ScenarioFileError(f"duplicate key {k!r}", lineno, source)
            out[k] = (v, lineno)
        return out, sec["line"]

    # robot
    items, _ = kv("robot")
    rkw = {}
    for k, (v, ln) in items.items():
        if k in _ROBOT_FLOATS:
            rkw[k] = _floats(v, 1, k, ln, source)[0]
        elif k in ("q_min", "q_max"):
            rkw[k] = _floats(v, 3, k, ln, source)
        elif k == "knee_branch":
            rkw[k] = tuple(v.split())
        else:
            raise ScenarioFileError(f"unknown robot key {k!r}", ln, source)
    try:
        robot = RobotModel(**rkw)
    except (ValueError, TypeError) as exc:
        line = sections["robot"]["line"] if "robot" in sections else None
        raise ScenarioFileError(f"invalid robot: {exc}", line, source) from None

    # terrain
    sec = sections.get("terrain")
    if sec is None:
        raise ScenarioFileError("missing [terrain] section", None, source)
    if not sec["items"]:
        raise ScenarioFileError("[terrain] has no segments", sec["line"], source)
    segs = []
    for lineno, ln in sec["items"]:
        x0, x1, z0, slope = _floats(ln, 4, "segment", lineno, source)
        segs.append(Segment(x0, x1, z0, slope))

    # goal
    items, gline = kv("goal")
    if gline is None:
        raise ScenarioFileError("missing [goal] section", None, source)
    try:
        seg_no = int(items["segment"][0])
        x_lo, x_hi = _floats(items["x"][0], 2, "x", items["x"][1], source)
    except KeyError as exc:
        raise ScenarioFileError(f"[goal] needs {exc.args[0]!r}", gline, source) from None
    except ValueError:
        raise ScenarioFileError("segment must be an integer", items["segment"][1], source) from None
    th = (None, None)
    if "theta" in items:
        th = _floats(items["theta"][0], 2, "theta", items["theta"][1], source)
    for k, (_, ln) in items.items():
        if k not in ("segment", "x", "theta"):
            raise ScenarioFileError(f"unknown goal key {k!r}", ln, source)
    if not 1 <= seg_no <= len(segs):
        raise ScenarioFileError(f"goal segment {seg_no} does not exist", items["segment"][1],
                                source)
    goal = Goal(seg_no - 1, x_lo, x_hi, *th)

    # init
    items, _ = kv("init")
    ikw = {}
    for k, (v, ln) in items.items():
        if k == "frame":
            ikw["frame"] = _floats(v, 3, k, ln, source)
        elif k in ("q", "qd"):
            p = _floats(v, 3, k, ln, source)
            ikw[f"{k}_lo"] = ikw[f"{k}_hi"] = p
        elif k in ("q_lo", "q_hi", "qd_lo", "qd_hi"):
            ikw[k] = _floats(v, 3, k, ln, source)
        elif k == "static":
            ikw["static"] = _bool(v, k, ln, source)
        else:
            raise ScenarioFileError(f"unknown init key {k!r}", ln, source)
    init = InitSet(**ikw)

    # plan
    items, pline = kv("plan")
    pkw = {}
    for k, (v, ln) in items.items():
        if k not in _PLAN_KEYS:
            raise ScenarioFileError(f"unknown plan key {k!r}", ln, source)
        try:
            if k in ("n_jumps", "N_t", "order", "pwl_segments"):
                pkw[k] = int(v)
            elif k in ("T_st", "foot_margin"):
                pkw[k] = float(v)
            elif k in ("qd_to_lo", "qd_to_hi"):
                pkw[k] = _floats(v, 3, k, ln, source)
            elif k == "t_air":
                pkw[k] = _floats(v, 2, k, ln, source)
            elif k in ("support_cuts", "zero_liftoff_wrench"):
                pkw[k] = _bool(v, k, ln, source)
            elif k == "objective":
                if v not in OBJECTIVES:
                    raise ScenarioFileError(f"objective must be one of {', '.join(OBJECTIVES)}",
                                            ln, source)
                pkw[k] = v
            else:
                pkw[k] = v
        except ValueError as exc:
            if isinstance(exc, ScenarioFileError):
                raise
            raise ScenarioFileError(f"{k}: {exc}", ln, source) from None
    try:
        scenario = Scenario(tuple(segs), goal, init, **pkw)
    except ScenarioError as exc:
        raise ScenarioFileError(str(exc), pline or sections["terrain"]["line"], source) from None

    # discretization
    items, dline = kv("discretization")
    res, grid = {}, None
    for k, (v, ln) in items.items():
        if k == "grid":
            try:
                grid = tuple(int(t) for t in v.split())
            except ValueError:
                raise ScenarioFileError("grid: expected three integers", ln, source) from None
            if len(grid) != 3 or min(grid) < 1:
                raise ScenarioFileError("grid: expected three positive integers", ln, source)
        elif k in ("double", "back", "front"):
            try:
                n = int(v)
            except ValueError:
                raise ScenarioFileError(f"{k}: expected an integer", ln, source) from None
            if n < 0:
                raise ScenarioFileError(f"{k}: negative cell count", ln, source)
            if n:
                res[StanceMode(k)] = n
        else:
            raise ScenarioFileError(f"unknown discretization key {k!r}", ln, source)
    if not res:
        res = {StanceMode.DOUBLE: 21}
    return ScenarioFile(robot, scenario, res, grid, source)


def load(path) -> ScenarioFile:
    p = Path(path)
    return loads(p.read_text(), str(p))
