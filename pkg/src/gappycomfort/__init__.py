"""Occupant-centric heater control from sparse temperature sensors.

Gappy POD reconstructs the full room temperature field from a handful of
boundary sensors, Fanger PMV turns it into per-occupant comfort, and a group
aggregate (median, discomfort-weighted average, median + MAD) drives the
heater setpoint.
"""

from .comfort import EnvironmentSample, PersonalFactors, pmv, ppd, spatial_pmv_map
from .gappy_pod import GappyReconstructor, build_basis, make_sampling_plan, reconstruct, reconstruction_error
from .group_pmv import GroupMethod, aggregate, satisfaction_ratios
from .snapshots import Grid, SnapshotMatrix, load_snapshots, moving_window_average

__version__ = "0.1.0"

__all__ = [
    "EnvironmentSample",
    "GappyReconstructor",
    "Grid",
    "GroupMethod",
    "PersonalFactors",
    "SnapshotMatrix",
    "aggregate",
    "build_basis",
    "load_snapshots",
    "make_sampling_plan",
    "moving_window_average",
    "pmv",
    "ppd",
    "reconstruct",
    "reconstruction_error",
    "satisfaction_ratios",
    "spatial_pmv_map",
]
