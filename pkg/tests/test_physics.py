"""Constants, coupling conventions, and the dipolar angular factor."""

import math

import numpy as np
import pytest

from spinprobe import (DEFAULT_CONSTANTS, PhysicalConstants, Position,
                       SingularPosition, TargetSpinState,
                       dipole_angular_factor, dipole_coupling,
                       effective_field)

# Independent arithmetic from CODATA values, kept separate from the library.
MU0 = 1.25663706212e-6
MUB = 9.2740100783e-24
HBAR = 1.054571817e-34
G_FACTOR = 2.0028
PAULI_G_SI = MU0 * G_FACTOR * G_FACTOR * MUB * MUB / (16 * math.pi)


def test_coupling_pauli_matches_hand_calculation():
    c = dipole_coupling(DEFAULT_CONSTANTS, convention="pauli")
    assert c.joule_m3 == pytest.approx(PAULI_G_SI, rel=1e-12)
    assert c.omega_um3 == pytest.approx(PAULI_G_SI / HBAR * 1e18, rel=1e-12)
    assert c.omega_um3 > 0


def test_coupling_spin_half_is_quarter_of_pauli_and_default():
    pauli = dipole_coupling(convention="pauli")
    half = dipole_coupling(convention="spin_half")
    assert half.joule_m3 == pytest.approx(pauli.joule_m3 / 4.0, rel=1e-15)
    assert dipole_coupling().convention == "spin_half"


def test_coupling_field_scale_is_sub_microtesla_at_one_micron():
    # On-axis field at 1 um: 2G/(g_e muB) * 2/(1 um)^3, well below a uT.
    for convention in ("pauli", "spin_half"):
        b = effective_field((0, 0, 1.0), +1, DEFAULT_CONSTANTS,
                            dipole_coupling(convention=convention))
        assert 0 < b < 1e-6


def test_coupling_vanishes_without_target_moment():
    constants = PhysicalConstants(g_t=0.0)
    assert dipole_coupling(constants).joule_m3 == 0.0


def test_coupling_linear_in_probe_g_factor():
    doubled = PhysicalConstants(g_e=2 * DEFAULT_CONSTANTS.g_e)
    assert dipole_coupling(doubled).joule_m3 == pytest.approx(
        2 * dipole_coupling(DEFAULT_CONSTANTS).joule_m3, rel=1e-15)


def test_coupling_rejects_unknown_convention():
    with pytest.raises(ValueError):
        dipole_coupling(convention="bohr")


@pytest.mark.parametrize("field", ["mu0", "muB", "g_e", "hbar"])
def test_constants_must_be_positive(field):
    with pytest.raises(ValueError):
        PhysicalConstants(**{field: 0.0})


def test_angular_factor_on_axis():
    assert dipole_angular_factor((0, 0, 1.0)) == pytest.approx(2.0, rel=1e-15)


def test_angular_factor_equatorial():
    assert dipole_angular_factor((1.0, 0, 0)) == pytest.approx(-1.0, rel=1e-15)


def test_angular_factor_magic_angle_node():
    # 3 z^2 = r^2 at (x, y, z) = (sqrt(2), 0, 1): the secular field vanishes.
    assert abs(dipole_angular_factor((math.sqrt(2.0), 0.0, 1.0))) < 1e-15
    assert abs(dipole_angular_factor((1.0, 1.0, 1.0))) < 1e-15


def test_angular_factor_scales_as_inverse_cube():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = rng.normal(size=3)
        if np.linalg.norm(p) < 0.1:
            continue
        lam = float(rng.uniform(0.05, 20.0))
        f1 = dipole_angular_factor(p)
        f2 = dipole_angular_factor(lam * p)
        assert f2 == pytest.approx(f1 / lam ** 3, rel=1e-10)


def test_angular_factor_axial_symmetry():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x, y, z = rng.normal(size=3)
        if x * x + y * y + z * z < 1e-2:
            continue
        theta = float(rng.uniform(0, 2 * math.pi))
        xr = x * math.cos(theta) - y * math.sin(theta)
        yr = x * math.sin(theta) + y * math.cos(theta)
        f = dipole_angular_factor((x, y, z))
        assert dipole_angular_factor((xr, yr, z)) == pytest.approx(f, rel=1e-9)
        assert dipole_angular_factor((x, y, -z)) == pytest.approx(f, rel=1e-12)


def test_angular_factor_sign_structure_around_cone():
    # Polar side positive, equatorial side negative, tested 1e-9 off the cone.
    z = 1.0
    r_cone = math.sqrt(2.0)
    assert dipole_angular_factor((r_cone - 1e-9, 0, z)) > 0
    assert dipole_angular_factor((r_cone + 1e-9, 0, z)) < 0
    assert dipole_angular_factor((0.3, 0, 1.0)) > 0           # deep polar
    assert dipole_angular_factor((1.0, 0, 0.1)) < 0           # deep equatorial


def test_effective_field_on_axis_value():
    # B = 4G/(g_e muB z^3) on the axis with s = +1.
    coupling = dipole_coupling(DEFAULT_CONSTANTS)
    z = 1.7
    expected = 4 * coupling.joule_m3 * 1e18 / (
        DEFAULT_CONSTANTS.g_e * DEFAULT_CONSTANTS.muB * z ** 3)
    assert effective_field((0, 0, z)) == pytest.approx(expected, rel=1e-12)
    assert effective_field((0, 0, z)) > 0


def test_effective_field_antisymmetric_in_target_state():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.uniform(-2, 2, size=3)
        if np.linalg.norm(p) < 0.1:
            continue
        up = effective_field(p, +1)
        down = effective_field(p, -1)
        assert up == -down


def test_effective_field_accepts_target_spin_state():
    assert effective_field((0, 0, 1), TargetSpinState(-1)) < 0
    with pytest.raises(ValueError):
        TargetSpinState(0)
    with pytest.raises(ValueError):
        effective_field((0, 0, 1), 2)


def test_magic_angle_position_gives_zero_field():
    assert effective_field((math.sqrt(2.0), 0, 1.0)) == pytest.approx(0.0, abs=1e-30)


def test_singularity_guard():
    with pytest.raises(SingularPosition):
        dipole_angular_factor((0.0, 0.0, 0.0))
    with pytest.raises(SingularPosition):
        dipole_angular_factor((1e-7, 0.0, 0.0))
    with pytest.raises(SingularPosition):
        effective_field((0.0, 0.0, 0.0))
    # just outside the guard radius is fine
    assert dipole_angular_factor((0.0, 0.0, 1.1e-6)) > 0


def test_position_distance():
    assert Position(3.0, 4.0, 0.0).distance() == pytest.approx(5.0)
