"""Simulation and verification of the bricklayers' process and the totally
asymmetric zero-range process."""
from .clocks import Direction, PoissonPlaneSet, derive_seed, splitmix64
from .coupling import (ConditionalCouplingSetup, CoupledRun, OrderMonitor, conditional_coupling,
                       discrepancy, run_coupled, second_class_census)
from .dynamics import LatticeState, ProcessSpec, Trajectory, simulate, window_limit
from .equilibrium import (GoodMeasureSpec, build_marginal, invert_density, mean_density, mean_rates,
                          monotone_coupled_sample, sample_marginal)
from .rates import (ExponentialBricklayers, RateFunction, Regime, TableDefined, ZeroRangeBounded,
                    ZeroRangeLinearCapped, rate_from_config)

__version__ = "0.1.0"

__all__ = [
    "ConditionalCouplingSetup", "CoupledRun", "Direction", "ExponentialBricklayers", "GoodMeasureSpec",
    "LatticeState", "OrderMonitor", "PoissonPlaneSet", "ProcessSpec", "RateFunction", "Regime",
    "TableDefined", "Trajectory", "ZeroRangeBounded", "ZeroRangeLinearCapped", "build_marginal",
    "conditional_coupling", "derive_seed", "discrepancy", "invert_density", "mean_density", "mean_rates",
    "monotone_coupled_sample", "rate_from_config", "run_coupled", "sample_marginal", "second_class_census",
    "simulate", "splitmix64", "window_limit",
]
