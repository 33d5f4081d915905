from .case import (
    BUNDLED_CASES,
    BranchSpec,
    BusSpec,
    CaseError,
    NetworkCase,
    build_admittance,
    bundled_case_path,
    case_from_dict,
    case_to_dict,
    load_case,
)
from .powerflow import PowerFlowError, PowerFlowModel, PowerFlowSolution, mismatch, solve_power_flow

__all__ = [
    "BUNDLED_CASES",
    "BranchSpec",
    "BusSpec",
    "CaseError",
    "NetworkCase",
    "PowerFlowError",
    "PowerFlowModel",
    "PowerFlowSolution",
    "build_admittance",
    "bundled_case_path",
    "case_from_dict",
    "case_to_dict",
    "load_case",
    "mismatch",
    "solve_power_flow",
]
