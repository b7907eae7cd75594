"""Multilevel Monte Carlo estimation of exit times and Feynman-Kac functionals
for diffusions stopped at the boundary of a bounded domain."""

__version__ = "0.1.0"

from .coupling import LevelParams, LevelSample, level_sample, sample_level_batch
from .driver import MlmcConfig, MlmcResult, run
from .model import (DomainGeometry, ExitTimeProfile, FeynmanKacData, ProblemSpec,
                    make_ball_problem, make_cube_problem, problem_preset)
from .paths import BoundaryMode, PathOutcome, PathState, simulate_path
from .stats import LevelStats

__all__ = [
    "BoundaryMode", "DomainGeometry", "ExitTimeProfile", "FeynmanKacData",
    "LevelParams", "LevelSample", "LevelStats", "MlmcConfig", "MlmcResult",
    "PathOutcome", "PathState", "ProblemSpec", "level_sample",
    "make_ball_problem", "make_cube_problem", "problem_preset",
    "sample_level_batch", "simulate_path", "run",
]
