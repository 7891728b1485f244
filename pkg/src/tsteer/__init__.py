"""Steering toolkit for 2D Navier-Stokes on the torus."""

from .config import SteeringConfig, load_config, preset_config
from .errors import TsteerError
from .experiments import run_delta_convergence, run_velocity_steering, run_vorticity_steering
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "SteeringConfig",
    "TsteerError",
    "load_config",
    "preset_config",
    "run_delta_convergence",
    "run_velocity_steering",
    "run_vorticity_steering",
]
