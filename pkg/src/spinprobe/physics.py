"""Physical constants and the secular dipolar field of a single target spin.

Unit conventions used everywhere in this package: lengths in micrometers,
times in seconds, magnetic fields in tesla, angular frequencies in rad/s.
Number densities are spins per um^3 (helpers convert from per cm^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularPosition

# Positions closer to the target than this are rejected rather than clamped:
# every supported probe region excludes the origin by construction, so a
# closer position is a configuration error, not a physical input.
MIN_DISTANCE_UM = 1e-6

# Probes on the cone 3 cos^2(theta) = 1 see no secular dipolar field; below
# this threshold on |3 z^2/r^2 - 1| the signal is treated as exactly zero.
MAGIC_ANGLE_TOL = 1e-12

PER_CM3_TO_PER_UM3 = 1e-12

COUPLING_CONVENTIONS = ("spin_half", "pauli")
DEFAULT_COUPLING_CONVENTION = "spin_half"


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA 2018 constants plus the probe and target g-factors.

    The default g = 2.0028 for both spins is the NV-center ground-state
    value. g_t = 0 is allowed (a target with no magnetic moment); all other
    fields must be strictly positive.
    """

    mu0: float = 1.25663706212e-6   # vacuum permeability, T*m/A
    muB: float = 9.2740100783e-24   # Bohr magneton, J/T
    g_e: float = 2.0028             # probe g-factor
    g_t: float = 2.0028             # target g-factor
    hbar: float = 1.054571817e-34   # reduced Planck constant, J*s

    def __post_init__(self):
        for name in ("mu0", "muB", "g_e", "hbar"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.g_t < 0:
            raise ValueError("g_t must be non-negative")

    @property
    def gyro_e(self) -> float:
        """Probe gyromagnetic ratio g_e * muB / hbar, rad/s/T."""
        return self.g_e * self.muB / self.hbar


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class DipoleCoupling:
    """Coupling coefficient of the secular z-z dipole Hamiltonian.

    joule_m3 carries energy units (J*m^3); omega_um3 is the same coefficient
    expressed as an angular frequency with micrometer lengths
    (rad*um^3/s), the form every sensitivity formula here consumes.
    """

    joule_m3: float
    omega_um3: float
    convention: str


def dipole_coupling(constants: PhysicalConstants = DEFAULT_CONSTANTS,
                    convention: str = DEFAULT_COUPLING_CONVENTION) -> DipoleCoupling:
    """Dipolar coupling strength between the target and one probe spin.

    Two operator normalizations for the coefficient of the Pauli-form z-z
    Hamiltonian are in circulation:

    * ``"pauli"``: magnetic moments g*muB*(sigma/2), which gives
      mu0*g_e*g_t*muB^2 / (16*pi);
    * ``"spin_half"``: the same construction with spin-1/2 operators kept in
      place of the Pauli matrices, which gives mu0*g_e*g_t*muB^2 / (64*pi).

    Ratio-type results are independent of the choice. The absolute
    detection-time benchmarks this package is validated against follow
    "spin_half", so that is the default.
    """
    if convention not in COUPLING_CONVENTIONS:
        raise ValueError(f"unknown coupling convention {convention!r}; "
                         f"expected one of {COUPLING_CONVENTIONS}")
    g_si = constants.mu0 * constants.g_e * constants.g_t * constants.muB ** 2 / (16 * math.pi)
    if convention == "spin_half":
        g_si /= 4.0
    return DipoleCoupling(joule_m3=g_si,
                          omega_um3=g_si / constants.hbar * 1e18,
                          convention=convention)


@dataclass(frozen=True)
class Position:
    """Probe location in micrometers; the target spin sits at the origin."""

    x: float
    y: float
    z: float

    def distance(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def as_position(p) -> Position:
    """Coerce a Position or any 3-sequence of lengths (um) to a Position."""
    if isinstance(p, Position):
        return p
    x, y, z = p
    return Position(float(x), float(y), float(z))


@dataclass(frozen=True)
class TargetSpinState:
    """Classical stand-in for the target spin's z projection: s = +1 or -1."""

    s: int = +1

    def __post_init__(self):
        if self.s not in (+1, -1):
            raise ValueError("target spin state must be +1 or -1")


def spin_sign(s) -> int:
    """Normalize a TargetSpinState or a bare +1/-1 to an int sign."""
    if isinstance(s, TargetSpinState):
        return s.s
    if s in (+1, -1):
        return int(s)
    raise ValueError(f"target spin state must be +1 or -1, got {s!r}")


def dipole_angular_factor(p) -> float:
    """(3 z^2 / r^2 - 1) / r^3 at position p, in um^-3.

    Positive inside the polar cones (|z|/r > 1/sqrt(3)), negative in the
    equatorial band, zero on the magic-angle cone. Scales as 1/lambda^3
    under p -> lambda*p.
    """
    p = as_position(p)
    r2 = p.x * p.x + p.y * p.y + p.z * p.z
    if r2 < MIN_DISTANCE_UM ** 2:
        raise SingularPosition(
            f"position ({p.x}, {p.y}, {p.z}) um is within {MIN_DISTANCE_UM} um "
            "of the target spin")
    return (3.0 * p.z * p.z / r2 - 1.0) / r2 ** 1.5


def angular_factor_grid(x, y, z) -> np.ndarray:
    """Vectorized dipole_angular_factor over coordinate arrays (um -> um^-3)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    r2 = x * x + y * y + z * z
    if np.any(r2 < MIN_DISTANCE_UM ** 2):
        raise SingularPosition("at least one position is within "
                               f"{MIN_DISTANCE_UM} um of the target spin")
    return (3.0 * z * z / r2 - 1.0) / r2 ** 1.5


def effective_field(p, s=+1,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS,
                    coupling: DipoleCoupling | None = None) -> float:
    """Static field (tesla) equivalent to the target's dipolar pull on a probe at p.

    B_eff = (2 G / (g_e muB)) * angular_factor(p) * s; odd in s.
    """
    if coupling is None:
        coupling = dipole_coupling(constants)
    return (2.0 * coupling.omega_um3 * dipole_angular_factor(p)
            * spin_sign(s) / constants.gyro_e)
