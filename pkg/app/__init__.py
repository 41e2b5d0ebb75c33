"""Sensitivity and stability analysis of disturbance-observer position loops."""

from app.bode import BodeReport, bode_integral, waterbed_sweep
from app.dobmodels import DEFAULT_PARAMS, LOOP_FAMILIES, DobParams
from app.rootlocus import critical_bandwidth, sweep
from app.simulate import Scenario, SimTrace, run

__all__ = [
    "DEFAULT_PARAMS",
    "LOOP_FAMILIES",
    "BodeReport",
    "DobParams",
    "Scenario",
    "SimTrace",
    "bode_integral",
    "critical_bandwidth",
    "run",
    "sweep",
    "waterbed_sweep",
]
