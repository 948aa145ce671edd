"""Analytic spin-echo uncertainty estimators.

All three estimators (global field, single-probe spin detection, ensemble
spin detection) share one template: delta = noise / (|slope| * sqrt(T/t_I)),
where the slope carries the echo envelope exp(-t_I/T2). Each is minimized
at t_I = T2/2. The trials count T/t_I is kept continuous here; the Monte
Carlo verifier uses the integer floor(T/t_I).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidProtocol, MagicAngle, ZeroSignal
from .geometry import (ColumnGeometry, CylinderGeometry, Geometry,
                       region_integral, standoff_distance, volume)
from .physics import (DEFAULT_CONSTANTS, MAGIC_ANGLE_TOL, DipoleCoupling,
                      PER_CM3_TO_PER_UM3, PhysicalConstants, as_position,
                      dipole_angular_factor, dipole_coupling)

# The linearized estimators assume the accumulated echo phase is small;
# results carry a warning flag once the worst-case phase exceeds this.
SMALL_PHASE_RAD = 0.1

ZERO_SIGNAL_TOL = 1e-15


@dataclass(frozen=True)
class ProbeSpinParams:
    """Coherence time, g-factor, and (for ensembles) number density of the probe spins.

    rho is in spins per um^3; use from_density_cm3 for per-cm^3 inputs.
    """

    T2: float
    g_e: float = 2.0028
    rho: float | None = None

    def __post_init__(self):
        if self.T2 <= 0:
            raise ValueError("T2 must be strictly positive")
        if self.g_e <= 0:
            raise ValueError("g_e must be strictly positive")
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be strictly positive when given")

    @property
    def gamma(self) -> float:
        """Dephasing rate 1/T2 in 1/s."""
        return 1.0 / self.T2

    @classmethod
    def from_density_cm3(cls, T2: float, rho_cm3: float,
                         g_e: float = 2.0028) -> "ProbeSpinParams":
        return cls(T2=T2, g_e=g_e, rho=rho_cm3 * PER_CM3_TO_PER_UM3)


# Defaults: a single NV center (T2 = 2 ms) and a dense NV ensemble
# (T2 = 84 us at 6.7e16 spins/cm^3).
DEFAULT_SINGLE_PROBE = ProbeSpinParams(T2=2e-3)
DEFAULT_ENSEMBLE_PROBE = ProbeSpinParams.from_density_cm3(T2=84e-6, rho_cm3=6.7e16)


@dataclass(frozen=True)
class EchoProtocol:
    """Interrogation time t_i and total measurement budget t_total, seconds."""

    t_i: float
    t_total: float

    def __post_init__(self):
        if not 0 < self.t_i <= self.t_total:
            raise InvalidProtocol(
                f"need 0 < t_i <= t_total, got t_i={self.t_i}, t_total={self.t_total}")

    @property
    def n_repetitions(self) -> int:
        """Integer number of echo repetitions that fit in the budget."""
        return int(self.t_total / self.t_i)


@dataclass(frozen=True)
class SensitivityResult:
    """One estimator evaluation: delta = noise / (|signal| * sqrt(trials)).

    signal is the slope of the measured expectation value with respect to
    the estimated parameter (signed); noise is the per-shot standard
    deviation of the observable; trials = t_total / t_i (continuous).
    """

    delta: float
    t_i_used: float
    signal: float
    noise: float
    trials: float
    large_phase: bool = False

    @property
    def warnings(self) -> list[str]:
        return ["large_phase"] if self.large_phase else []


def optimal_interrogation_time(params: ProbeSpinParams) -> float:
    """The t_I that minimizes every estimator here: half the coherence time."""
    return params.T2 / 2.0


def scan_interrogation_time(delta_of_t: Callable[[float], float],
                            T2: float, num: int = 1000,
                            span: tuple[float, float] = (0.01, 10.0)
                            ) -> tuple[float, float]:
    """Numeric 1-D minimizer over t_I: log grid of `num` points on span*T2.

    Returns (best t_I, best delta). Deliberately independent of the analytic
    T2/2 optimum so tests can use it as an oracle.
    """
    grid = np.geomspace(span[0] * T2, span[1] * T2, num)
    values = np.array([delta_of_t(float(t)) for t in grid])
    k = int(np.argmin(values))
    return float(grid[k]), float(values[k])


def _check_protocol(t_i: float, t_total: float) -> float:
    if not 0 < t_i <= t_total:
        raise InvalidProtocol(
            f"need 0 < t_i <= t_total, got t_i={t_i}, t_total={t_total}")
    return t_total / t_i


def echo_expectation(field_t: float, t_i: float, params: ProbeSpinParams,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """<sigma_y> after the echo: exp(-t_i/T2) * sin(g_e muB B t_i / hbar).

    The field magnitude B is assumed to flip sign exactly at the pi pulse,
    so both free-evolution halves add phase.
    """
    phase = params.g_e * constants.muB * field_t * t_i / constants.hbar
    return math.exp(-t_i / params.T2) * math.sin(phase)


def field_uncertainty(t_i: float, t_total: float, params: ProbeSpinParams,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS
                      ) -> SensitivityResult:
    """Uncertainty of a global-field estimate (tesla) in the small-field limit."""
    trials = _check_protocol(t_i, t_total)
    gyro = params.g_e * constants.muB / constants.hbar
    slope = math.exp(-t_i / params.T2) * gyro * t_i   # d<sigma_y>/dB at B=0, 1/T
    noise = 1.0
    return SensitivityResult(delta=noise / (abs(slope) * math.sqrt(trials)),
                             t_i_used=t_i, signal=slope, noise=noise,
                             trials=trials)


def single_probe_uncertainty(p, t_i: float, t_total: float,
                             params: ProbeSpinParams,
                             constants: PhysicalConstants = DEFAULT_CONSTANTS,
                             coupling: DipoleCoupling | None = None
                             ) -> SensitivityResult:
    """Uncertainty of the target-spin estimate from one probe at position p.

    Raises MagicAngle when the probe sits on the zero-signal cone and
    SingularPosition when it coincides with the target.
    """
    trials = _check_protocol(t_i, t_total)
    p = as_position(p)
    f = dipole_angular_factor(p)
    r2 = p.x * p.x + p.y * p.y + p.z * p.z
    if abs(3.0 * p.z * p.z / r2 - 1.0) < MAGIC_ANGLE_TOL:
        raise MagicAngle(
            f"probe at ({p.x}, {p.y}, {p.z}) um sits on the magic-angle cone; "
            "the uncertainty diverges")
    if coupling is None:
        coupling = dipole_coupling(constants)
    g = coupling.omega_um3
    slope = math.exp(-t_i / params.T2) * 2.0 * g * f * t_i   # d<sigma_y>/ds
    noise = 1.0
    return SensitivityResult(delta=noise / (abs(slope) * math.sqrt(trials)),
                             t_i_used=t_i, signal=slope, noise=noise,
                             trials=trials,
                             large_phase=abs(2.0 * g * f * t_i) > SMALL_PHASE_RAD)


def _worst_case_angular_factor(geom: Geometry) -> float:
    # max |f| over the region: attained on the axis at z_min for a column
    # (|f| <= 2/r^3 and r >= z_min) and at (r_min, 0, 0) for a cylinder
    # (on the inner wall the equatorial value 1/r_min^3 dominates).
    if isinstance(geom, ColumnGeometry):
        return 2.0 / geom.z_min ** 3
    return 1.0 / geom.r_min ** 3


def ensemble_uncertainty(geom: Geometry, t_i: float, t_total: float,
                         params: ProbeSpinParams,
                         constants: PhysicalConstants = DEFAULT_CONSTANTS,
                         coupling: DipoleCoupling | None = None
                         ) -> SensitivityResult:
    """Uncertainty of the target-spin estimate from a homogeneous probe ensemble.

    Signal is the continuous-limit slope d<M_y>/ds = exp(-t_i/T2) * 2 G rho
    I t_i with I the region integral; noise is the projection noise
    sqrt(L) of L = rho * volume spins. Raises ZeroSignal for degenerate or
    fully cancelling regions.
    """
    trials = _check_protocol(t_i, t_total)
    if params.rho is None:
        raise ValueError("ensemble estimate requires ProbeSpinParams.rho")
    integral = region_integral(geom)
    vol = volume(geom)
    if vol <= 0.0 or abs(integral) < ZERO_SIGNAL_TOL:
        raise ZeroSignal(f"region {geom} has zero volume or zero net signal")
    if coupling is None:
        coupling = dipole_coupling(constants)
    g = coupling.omega_um3
    n_spins = params.rho * vol
    slope = math.exp(-t_i / params.T2) * 2.0 * g * params.rho * integral * t_i
    noise = math.sqrt(n_spins)
    worst_phase = 2.0 * g * _worst_case_angular_factor(geom) * t_i
    return SensitivityResult(delta=noise / (abs(slope) * math.sqrt(trials)),
                             t_i_used=t_i, signal=slope, noise=noise,
                             trials=trials,
                             large_phase=worst_phase > SMALL_PHASE_RAD)


def reference_position(geom: Geometry):
    """Single-probe position a given ensemble geometry is compared against.

    On the axis at the standoff for a column; on the inner wall in the
    equatorial plane for a cylinder.
    """
    if isinstance(geom, ColumnGeometry):
        return (0.0, 0.0, geom.z_min)
    if isinstance(geom, CylinderGeometry):
        return (geom.r_min, 0.0, 0.0)
    raise TypeError(f"not a geometry: {geom!r}")


def sensitivity_ratio(geom: Geometry, params_single: ProbeSpinParams,
                      params_ens: ProbeSpinParams, t_total: float,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS,
                      coupling: DipoleCoupling | None = None) -> float:
    """delta_s(single probe at the reference position) / delta_s(ensemble).

    Both estimators run at their own optimal t_I = T2/2. The coupling
    strength and the budget T cancel; values above 1 mean the ensemble
    detects the target faster.
    """
    single = single_probe_uncertainty(reference_position(geom),
                                      optimal_interrogation_time(params_single),
                                      t_total, params_single, constants, coupling)
    ens = ensemble_uncertainty(geom, optimal_interrogation_time(params_ens),
                               t_total, params_ens, constants, coupling)
    return single.delta / ens.delta
