"""Loosely coupled splitting solver for Stokes flow interacting with a Biot poroelastic medium."""

from .driver import RunConfig, RunResult, build_systems, run
from .mms import MmsCase, ZeroCase, make_case
from .params import PhysicalParams
from .subproblems import Discretization, State, build_discretization

__all__ = [
    "Discretization", "MmsCase", "PhysicalParams", "RunConfig", "RunResult", "State",
    "ZeroCase", "build_discretization", "build_systems", "make_case", "run",
]
__version__ = "0.1.0"
