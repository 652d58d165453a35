"""Headline experiments: bad-cube censuses, sublevel content, effective critical
sets, the M(N, a) recursion and propagation-exponent fits."""
from .census import (CensusResult, Inapplicable, bad_cube_census, capacity_census, classify_cubes,
                     hyperplane_census, width_of_bad_set)
from .critical import CriticalSetCover, effective_critical_set
from .exponent import FitError, fit_propagation_exponent, weak_bound_calculator
from .recursion import (RecursionGridError, RecursionState, base_case_boundary, fit_decay, induction_replay,
                        recursion_simulate, refine_oracle)
from .sublevel import SublevelReport, normalize_on, sublevel_content, sublevel_set

__all__ = [
    "CensusResult", "Inapplicable", "bad_cube_census", "capacity_census", "classify_cubes",
    "hyperplane_census", "width_of_bad_set", "CriticalSetCover", "effective_critical_set", "FitError",
    "fit_propagation_exponent", "weak_bound_calculator", "RecursionGridError", "RecursionState",
    "base_case_boundary", "fit_decay", "induction_replay", "recursion_simulate", "refine_oracle",
    "SublevelReport", "normalize_on", "sublevel_content", "sublevel_set",
]
