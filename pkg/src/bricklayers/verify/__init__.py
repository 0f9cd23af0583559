"""Exact and Monte Carlo checks of the process's structural properties."""
from .checks import FAIL, INCONCLUSIVE, PASS, CheckResult, summary_table
from .generator import CylinderFunction, StateSpaceTooLarge, apply_generator, generator_mean_zero
from .oracles import generator_matrix, total_variation, transient_law
from .suites import SUITES

__all__ = [
    "FAIL", "INCONCLUSIVE", "PASS", "SUITES", "CheckResult", "CylinderFunction", "StateSpaceTooLarge",
    "apply_generator", "generator_matrix", "generator_mean_zero", "summary_table", "total_variation",
    "transient_law",
]
