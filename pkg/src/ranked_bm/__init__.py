"""Simulation and analysis of competing Brownian particle systems.

Finite and infinite systems of Brownian particles with rank-dependent
drifts and diffusions, with symmetric or asymmetric collisions: gap-process
reflection data, product-form stationary laws, truncation ladders, reflected
Euler simulation and empirical checks of stationarity, comparison and
collision properties.
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (  # noqa: F401
    INFINITE, NAMED, RANKED, InitialConfig, SystemSpec, ValidationReport,
    check_initial_admissible, gaps_from_positions, positions_from_gaps,
    rank_configuration, validate_spec,
)
from .reflection import (  # noqa: F401
    ReflectionData, StationaryLaw, build_reflection_data,
    closed_form_neg_Rinv_mu_symmetric, skew_symmetry_check, stationary_rates,
    tightness_check,
)
from .sequences import Constant, Log, Power, SeqRule  # noqa: F401
