"""Mixed-integer jump planning for a planar two-legged robot."""
from .robot import Cell, RobotModel, StanceMode, discretize_cspace
from .scenario_file import ScenarioFile, ScenarioFileError, load as load_scenario
from .transcribe import Goal, InitSet, JumpPlan, MicpModel, Scenario, Segment, build
from .pipeline import plan
from .solve import SolverParams, solve_milp, solve_model
from .verify import audit, simulate, torque_audit
from .wrench import attach_fwps, cached_fwps

__version__ = "0.1.0"

__all__ = ["Cell", "RobotModel", "StanceMode", "discretize_cspace", "ScenarioFile",
           "ScenarioFileError", "load_scenario", "Goal", "InitSet", "JumpPlan", "MicpModel",
           "Scenario", "Segment", "build", "plan", "SolverParams", "solve_milp", "solve_model",
           "audit", "simulate", "torque_audit", "attach_fwps", "cached_fwps"]
