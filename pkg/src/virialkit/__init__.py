"""Virial theorems for mechanics in quasi-velocities, quasi-momenta and on Lie algebroids."""

from .averaging import (
    AverageResult,
    IntegratorSettings,
    Trajectory,
    VirialReport,
    detect_period,
    integrate,
    integrate_dynamics,
    time_average,
    virial_report,
)
from .errors import *  # noqa: F401,F403
from .models import ModelDescriptor, build, model_names
from .system import Dynamics, VirialFunction

__version__ = "0.1.0"
