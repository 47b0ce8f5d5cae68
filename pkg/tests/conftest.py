import os
import time
from pathlib import Path

import pytest

from micpjump.robot import RobotModel

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "micpjump" / "scenarios"


@pytest.fixture(scope="session", autouse=True)
def _cache_dir(tmp_path_factory):
    # keep the wrench polytope cache across the session, outside the home dir
    if "MICPJUMP_CACHE" not in os.environ:
        os.environ["MICPJUMP_CACHE"] = str(tmp_path_factory.mktemp("fwp-cache"))
    yield


@pytest.fixture(scope="session")
def robot():
    return RobotModel()


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIOS


_LOADED = {}


def load_scenario(name):
    """Parsed shipped scenario plus its cells (with wrench polytopes), memoized."""
    if name not in _LOADED:
        from micpjump.cli import load_cells
        from micpjump.scenario_file import load
        sf = load(SCENARIOS / f"{name}.scn")
        _LOADED[name] = (sf, load_cells(sf))
    return _LOADED[name]


@pytest.fixture(scope="session")
def jump_forward():
    return load_scenario("jump_forward")


@pytest.fixture(scope="session")
def parkour():
    return load_scenario("parkour")


_PLANS = {}
PLAN_SECONDS = {}


def planned(name, backend="external"):
    """Pipeline outcome for a shipped scenario, solved once per session."""
    key = (name, backend)
    if key not in _PLANS:
        from micpjump import pipeline
        from micpjump.solve import SolverParams
        sf, cells = load_scenario(name)
        t0 = time.perf_counter()
        out = pipeline.plan(sf.scenario, sf.robot, cells, SolverParams(), backend=backend)
        PLAN_SECONDS[key] = time.perf_counter() - t0
        _PLANS[key] = (sf, cells, out)
    return _PLANS[key]


@pytest.fixture(scope="session")
def forward_plan():
    return planned("jump_forward")


@pytest.fixture(scope="session")
def parkour_plan():
    return planned("parkour")


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
