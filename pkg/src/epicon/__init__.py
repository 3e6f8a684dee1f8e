"""Optimal control of n-compartment epidemic models.

Forward simulation, Pontryagin optimality conditions, sweep and projected
gradient solvers, and singular-arc structure analysis.
"""

from .dynamics import ControlTrajectory, Trajectory, epidemic_metrics, simulate_dense, simulate_forward
from .kernels import BACKEND
from .model import (
    PAPER_PRESETS,
    PRESET_NAMES,
    CostSpec,
    EpidemicModel,
    InitialState,
    Scenario,
    eval_nu,
    grad_nu,
    hess_nu_diag,
    preset,
    validate_cost,
    validate_init,
    validate_model,
    validate_scenario,
)

__version__ = "0.1.0"
