"""Tolerances used across the package."""

STRUCTURAL_TOL = 1e-12
ODE_TOL = 1e-6
ADMISSIBILITY_TOL = 1e-10
STATE_TOL = 1e-10
GENERATOR_TOL = 1e-10
TRACE_DRIFT_TOL = 1e-8
# default number of RK4 steps over the horizon
DEFAULT_STEPS = 2000
