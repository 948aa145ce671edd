"""Region volumes, closed-form integrals, and the quadrature oracle."""

import math

import numpy as np
import pytest

from spinprobe import (ColumnGeometry, CylinderGeometry,
                       QuadratureNoConvergence, column_integral,
                       cylinder_integral, region_integral,
                       region_integral_quadrature, volume)
from spinprobe.geometry import column_antiderivative

# Frozen oracle values, confirmed by the adaptive quadrature at rel_tol 1e-9
# (see test_closed_forms_match_quadrature_oracle) and by direct arithmetic.
COLUMN_1_2_1 = 2 * math.pi * (2 / math.sqrt(5) - 1 / math.sqrt(2))   # 1.176968846674215
CYL_REFERENCE = 4 * math.pi * 0.58 * (1 / math.hypot(1.77, 0.58)
                                      - 1 / math.hypot(1.0, 0.58))   # -2.3917116539141325


def random_column(rng):
    z1, z2 = sorted(np.exp(rng.uniform(np.log(0.01), np.log(100), 2)))
    r = float(np.exp(rng.uniform(np.log(0.01), np.log(100))))
    return ColumnGeometry(float(z1), float(z2), r)


def random_cylinder(rng):
    r1, r2 = sorted(np.exp(rng.uniform(np.log(0.01), np.log(100), 2)))
    z = float(np.exp(rng.uniform(np.log(0.01), np.log(100))))
    return CylinderGeometry(float(r1), float(r2), z)


def test_volume_unit_column():
    assert volume(ColumnGeometry(1, 2, 1)) == pytest.approx(math.pi, rel=1e-15)


def test_volume_cylinder_reference():
    expected = 2 * math.pi * 0.58 * (1.77 ** 2 - 1.0)   # ~7.773 um^3
    assert volume(CylinderGeometry(1, 1.77, 0.58)) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(7.773, abs=5e-4)


def test_volume_degenerate_regions():
    assert volume(ColumnGeometry(1, 1, 5)) == 0.0
    assert volume(CylinderGeometry(1, 1, 5)) == 0.0
    assert volume(ColumnGeometry(1, 2, 0)) == 0.0


def test_geometry_invariants():
    with pytest.raises(ValueError):
        ColumnGeometry(0.0, 1, 1)
    with pytest.raises(ValueError):
        ColumnGeometry(2, 1, 1)
    with pytest.raises(ValueError):
        ColumnGeometry(1, 2, -0.5)
    with pytest.raises(ValueError):
        CylinderGeometry(0.0, 1, 1)
    with pytest.raises(ValueError):
        CylinderGeometry(2, 1, 1)
    with pytest.raises(ValueError):
        CylinderGeometry(1, 2, -0.5)


def test_column_integral_reference_value():
    assert column_integral(ColumnGeometry(1, 2, 1)) == pytest.approx(
        COLUMN_1_2_1, rel=1e-15)
    assert COLUMN_1_2_1 == pytest.approx(1.17697, abs=5e-6)


def test_column_integral_degenerate_limits():
    assert column_integral(ColumnGeometry(1, 1, 3)) == 0.0
    assert column_integral(ColumnGeometry(1, 2, 0)) == 0.0
    # r_max -> 0: both antiderivative terms approach 1
    assert column_integral(ColumnGeometry(1, 2, 1e-9)) == pytest.approx(0.0, abs=1e-12)


def test_column_integral_is_nonnegative():
    rng = np.random.default_rng(5)
    for _ in range(200):
        assert column_integral(random_column(rng)) >= 0.0


def test_cylinder_integral_reference_value():
    assert cylinder_integral(CylinderGeometry(1, 1.77, 0.58)) == pytest.approx(
        CYL_REFERENCE, rel=1e-15)
    assert CYL_REFERENCE == pytest.approx(-2.392, abs=5e-4)


def test_cylinder_integral_nonpositive_and_degenerate():
    assert cylinder_integral(CylinderGeometry(1, 1, 2)) == 0.0
    rng = np.random.default_rng(6)
    for _ in range(200):
        assert cylinder_integral(random_cylinder(rng)) <= 0.0


def test_cylinder_integral_vanishes_for_tall_shells():
    # |J| -> 0 as z_max -> infinity: the shell is dominated by near-cone
    # directions; checked against the quadrature oracle at z_max = 1000.
    geom = CylinderGeometry(1.0, 1.77, 1000.0)
    j = cylinder_integral(geom)
    assert abs(j) < 2e-5
    q = region_integral_quadrature(geom, 1e-9)
    assert q == pytest.approx(j, rel=1e-7)


def test_cylinder_equals_column_antiderivative_difference():
    rng = np.random.default_rng(12)
    for _ in range(50):
        geom = random_cylinder(rng)
        via_columns = (column_antiderivative(geom.r_max, -geom.z_max, geom.z_max)
                       - column_antiderivative(geom.r_min, -geom.z_max, geom.z_max))
        assert cylinder_integral(geom) == pytest.approx(via_columns, rel=1e-12, abs=1e-15)


def test_column_additivity_in_z():
    rng = np.random.default_rng(13)
    for _ in range(50):
        z1, zm, z2 = sorted(np.exp(rng.uniform(np.log(0.05), np.log(50), 3)))
        r = float(np.exp(rng.uniform(np.log(0.05), np.log(50))))
        parts = (column_integral(ColumnGeometry(z1, zm, r))
                 + column_integral(ColumnGeometry(zm, z2, r)))
        whole = column_integral(ColumnGeometry(z1, z2, r))
        assert parts == pytest.approx(whole, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_scale_invariance_closed_forms(lam):
    col = ColumnGeometry(0.7, 2.3, 1.4)
    scaled = ColumnGeometry(0.7 * lam, 2.3 * lam, 1.4 * lam)
    assert column_integral(scaled) == pytest.approx(column_integral(col), rel=1e-12)
    cyl = CylinderGeometry(0.9, 1.6, 0.5)
    scaled = CylinderGeometry(0.9 * lam, 1.6 * lam, 0.5 * lam)
    assert cylinder_integral(scaled) == pytest.approx(cylinder_integral(cyl), rel=1e-12)


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_scale_invariance_quadrature(lam):
    geom = ColumnGeometry(0.7 * lam, 2.3 * lam, 1.4 * lam)
    assert region_integral_quadrature(geom, 1e-9) == pytest.approx(
        column_integral(ColumnGeometry(0.7, 2.3, 1.4)), rel=1e-8)


def test_closed_forms_match_quadrature_oracle():
    # Self-consistency sweep: 100 random columns and 100 random cylinders,
    # log-uniform over [0.01, 100] um, at rel_tol 1e-9.
    rng = np.random.default_rng(20240811)
    for _ in range(100):
        geom = random_column(rng)
        closed = column_integral(geom)
        quad = region_integral_quadrature(geom, 1e-9)
        assert quad == pytest.approx(closed, rel=1e-8), geom
    for _ in range(100):
        geom = random_cylinder(rng)
        closed = cylinder_integral(geom)
        quad = region_integral_quadrature(geom, 1e-9)
        assert quad == pytest.approx(closed, rel=1e-8), geom


def test_quadrature_sign_change_stress_case():
    # Thin wide disk whose integrand changes sign inside the region: the
    # positive polar core nearly cancels against the equatorial band.
    geom = ColumnGeometry(1.0, 1.001, 100.0)
    closed = column_integral(geom)
    quad = region_integral_quadrature(geom, 1e-9)
    assert quad == pytest.approx(closed, rel=1e-7)


def test_quadrature_degenerate_region_is_zero():
    assert region_integral_quadrature(ColumnGeometry(1, 1, 2)) == 0.0
    assert region_integral_quadrature(CylinderGeometry(1, 2, 0)) == 0.0


def test_quadrature_rel_tol_validation():
    geom = ColumnGeometry(1, 2, 1)
    with pytest.raises(ValueError):
        region_integral_quadrature(geom, 1e-13)
    with pytest.raises(ValueError):
        region_integral_quadrature(geom, 1e-2)


def test_quadrature_raises_when_budget_exhausted(monkeypatch):
    import spinprobe.geometry as geometry
    monkeypatch.setattr(geometry, "QUADRATURE_PANEL_BUDGET", 20)
    with pytest.raises(QuadratureNoConvergence) as exc_info:
        region_integral_quadrature(ColumnGeometry(0.01, 90.0, 80.0), 1e-12)
    assert exc_info.value.estimate is not None


def test_region_integral_dispatch():
    assert region_integral(ColumnGeometry(1, 2, 1)) == column_integral(ColumnGeometry(1, 2, 1))
    assert region_integral(CylinderGeometry(1, 2, 1)) == cylinder_integral(CylinderGeometry(1, 2, 1))
    with pytest.raises(TypeError):
        region_integral("not a geometry")
