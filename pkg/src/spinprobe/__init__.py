"""Spin-echo detection of a single target spin with probe spins.

Models the sensitivity of spin-echo readout for one probe spin and for
homogeneous probe-spin ensembles in columnar and cylindrical regions,
optimizes the ensemble geometry at a given standoff, and verifies every
analytic uncertainty against Monte Carlo simulation of the measurement
process.
"""

from .errors import (ConfigError, InvalidProtocol, MagicAngle,
                     NoFeasiblePoint, QuadratureNoConvergence,
                     SingularPosition, SpinProbeError, ZeroSignal)
from .geometry import (ColumnGeometry, CylinderGeometry, Geometry,
                       column_integral, cylinder_integral, region_integral,
                       region_integral_quadrature, volume)
from .montecarlo import (McConfig, McReport, QubitState, evolve_echo,
                         sample_sigma_y, simulate_ensemble_estimates,
                         simulate_single_estimates, verify_uncertainty)
from .optimize import (OptimizationResult, SweepRow, crossover_standoff,
                       make_geometry, optimize_geometry, sweep_standoff)
from .physics import (DEFAULT_CONSTANTS, DipoleCoupling, PhysicalConstants,
                      Position, TargetSpinState, dipole_angular_factor,
                      dipole_coupling, effective_field)
from .sensing import (DEFAULT_ENSEMBLE_PROBE, DEFAULT_SINGLE_PROBE,
                      EchoProtocol, ProbeSpinParams, SensitivityResult,
                      echo_expectation, ensemble_uncertainty,
                      field_uncertainty, optimal_interrogation_time,
                      scan_interrogation_time, sensitivity_ratio,
                      single_probe_uncertainty)

__version__ = "0.1.0"

__all__ = [
    "ColumnGeometry", "ConfigError", "CylinderGeometry",
    "DEFAULT_CONSTANTS", "DEFAULT_ENSEMBLE_PROBE", "DEFAULT_SINGLE_PROBE",
    "DipoleCoupling", "EchoProtocol", "Geometry", "InvalidProtocol",
    "MagicAngle", "McConfig", "McReport", "NoFeasiblePoint",
    "OptimizationResult", "PhysicalConstants", "Position", "ProbeSpinParams",
    "QuadratureNoConvergence", "QubitState", "SensitivityResult",
    "SingularPosition", "SpinProbeError", "SweepRow", "TargetSpinState",
    "ZeroSignal", "column_integral", "crossover_standoff",
    "cylinder_integral", "dipole_angular_factor", "dipole_coupling",
    "echo_expectation", "effective_field", "ensemble_uncertainty",
    "evolve_echo", "field_uncertainty", "make_geometry",
    "optimal_interrogation_time", "optimize_geometry", "region_integral",
    "region_integral_quadrature", "sample_sigma_y",
    "scan_interrogation_time", "sensitivity_ratio",
    "simulate_ensemble_estimates", "simulate_single_estimates",
    "single_probe_uncertainty", "sweep_standoff", "verify_uncertainty",
    "volume",
]
