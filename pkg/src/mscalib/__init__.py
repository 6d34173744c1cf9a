"""Numerical calibration toolkit for Mumford-Shah triple junctions."""

from .characteristics import Characteristics, FieldIngredients
from .conditions import check_b, check_c, check_e, jump_quadrature
from .divergence import check_divergence
from .dscan import check_d_global
from .energy import minimality_experiment, ms_energy, sector_mesh
from .errors import (BranchCut, CalibError, ConfigError, GeometryViolated, InfeasibleParams,
                     NoCrossing, OutOfDomain)
from .field import CalibrationField
from .harmonic import GEOMETRY, SectorHarmonicTriple, Symmetry, check_hypotheses
from .oracles import characteristic_oracles, rho_oracles
from .params import CalibrationParams, select_params
from .report import ConditionResult, VerificationReport
from .step3 import Step3Geometry, check_m_functions, step3_containment

__version__ = "0.1.0"

__all__ = [
    "BranchCut", "CalibError", "CalibrationField", "CalibrationParams", "Characteristics",
    "ConditionResult", "ConfigError", "FieldIngredients", "GEOMETRY", "GeometryViolated",
    "InfeasibleParams", "NoCrossing", "OutOfDomain", "SectorHarmonicTriple", "Step3Geometry",
    "Symmetry", "VerificationReport", "characteristic_oracles", "check_b", "check_c",
    "check_d_global", "check_divergence", "check_e", "check_hypotheses", "check_m_functions",
    "jump_quadrature", "minimality_experiment", "ms_energy", "rho_oracles", "sector_mesh",
    "select_params", "step3_containment",
]
