"""Probe-ensemble regions, volumes, and the region integral of the dipolar angular factor.

Both supported regions have closed-form integrals; an independent adaptive
quadrature over the raw integrand acts as the oracle for them. Degenerate
(zero-volume) regions are constructible and integrate to zero so that
optimizers may probe boundary points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import QuadratureNoConvergence

QUADRATURE_PANEL_BUDGET = 1_000_000
_REL_TOL_RANGE = (1e-12, 1e-3)


@dataclass(frozen=True)
class ColumnGeometry:
    """Solid pillar above the target: 0 <= r <= r_max, z_min <= z <= z_max (um).

    z_min is the standoff distance. z_max == z_min or r_max == 0 give a
    degenerate (empty) region; z_min must stay strictly positive so the
    region always excludes the origin.
    """

    z_min: float
    z_max: float
    r_max: float

    def __post_init__(self):
        if not self.z_min > 0:
            raise ValueError("column requires z_min > 0")
        if self.z_max < self.z_min:
            raise ValueError("column requires z_max >= z_min")
        if self.r_max < 0:
            raise ValueError("column requires r_max >= 0")


@dataclass(frozen=True)
class CylinderGeometry:
    """Annular cylinder with the target centered in its bore (um).

    Radial extent r_min <= r <= r_max, axial extent -z_max <= z <= z_max
    (z_max is the half-height). r_min is the standoff distance and must be
    strictly positive; r_max == r_min or z_max == 0 give a degenerate region.
    """

    r_min: float
    r_max: float
    z_max: float

    def __post_init__(self):
        if not self.r_min > 0:
            raise ValueError("cylinder requires r_min > 0")
        if self.r_max < self.r_min:
            raise ValueError("cylinder requires r_max >= r_min")
        if self.z_max < 0:
            raise ValueError("cylinder requires z_max >= 0")


Geometry = Union[ColumnGeometry, CylinderGeometry]


def standoff_distance(geom: Geometry) -> float:
    """Minimum target-to-probe distance: z_min for a column, r_min for a cylinder."""
    if isinstance(geom, ColumnGeometry):
        return geom.z_min
    return geom.r_min


def volume(geom: Geometry) -> float:
    """Region volume in um^3."""
    if isinstance(geom, ColumnGeometry):
        return math.pi * geom.r_max ** 2 * (geom.z_max - geom.z_min)
    if isinstance(geom, CylinderGeometry):
        return 2.0 * math.pi * geom.z_max * (geom.r_max ** 2 - geom.r_min ** 2)
    raise TypeError(f"not a geometry: {geom!r}")


def column_antiderivative(r_max: float, z_lo: float, z_hi: float) -> float:
    """Integral of the angular factor over a full disk column r <= r_max, z_lo <= z <= z_hi.

    Equals 2*pi*[z/sqrt(r_max^2+z^2)] between the two z limits; valid for
    signed z as long as r_max > 0 or the interval excludes z = 0.
    """
    return 2.0 * math.pi * (z_hi / math.hypot(r_max, z_hi)
                            - z_lo / math.hypot(r_max, z_lo))


def column_integral(geom: ColumnGeometry) -> float:
    """Closed-form region integral over a column; non-negative, -> 0 as r_max -> 0."""
    return column_antiderivative(geom.r_max, geom.z_min, geom.z_max)


def cylinder_integral(geom: CylinderGeometry) -> float:
    """Closed-form region integral over the annular cylinder.

    4*pi*z_max*(1/sqrt(r_max^2+z_max^2) - 1/sqrt(r_min^2+z_max^2)); never
    positive because r_max >= r_min puts the bulk of the region in the
    negative equatorial band. Consumers take the absolute value.
    """
    return 4.0 * math.pi * geom.z_max * (1.0 / math.hypot(geom.r_max, geom.z_max)
                                         - 1.0 / math.hypot(geom.r_min, geom.z_max))


def region_integral(geom: Geometry) -> float:
    """Closed-form integral of the dipolar angular factor over the region (signed)."""
    if isinstance(geom, ColumnGeometry):
        return column_integral(geom)
    if isinstance(geom, CylinderGeometry):
        return cylinder_integral(geom)
    raise TypeError(f"not a geometry: {geom!r}")


# ---------------------------------------------------------------------------
# Independent quadrature oracle
# ---------------------------------------------------------------------------

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(7)
_SQRT2 = math.sqrt(2.0)
_TWO_PI = 2.0 * math.pi


def _panel_rule(bounds: np.ndarray) -> np.ndarray:
    """Tensor 7-point Gauss-Legendre estimate for a batch of (r, z) panels.

    bounds has one panel (r_lo, r_hi, z_lo, z_hi) per row. The integrand is
    2*pi*r*(3 z^2/(r^2+z^2) - 1)/(r^2+z^2)^(3/2): the raw angular-factor
    kernel in cylindrical coordinates, the azimuthal integral already done
    analytically.
    """
    a, b, c, d = bounds.T
    half_r = 0.5 * (b - a)
    half_z = 0.5 * (d - c)
    r = 0.5 * (a + b)[:, None] + half_r[:, None] * _GAUSS_NODES
    z = 0.5 * (c + d)[:, None] + half_z[:, None] * _GAUSS_NODES
    rr = r[:, :, None]
    zz = z[:, None, :]
    rho2 = rr * rr + zz * zz
    f = _TWO_PI * rr * (3.0 * zz * zz / rho2 - 1.0) / rho2 ** 1.5
    return half_r * half_z * np.einsum("i,nij,j->n", _GAUSS_WEIGHTS, f,
                                       _GAUSS_WEIGHTS)


def _split4(bounds: np.ndarray) -> np.ndarray:
    """2x2 split of each panel; children of row i land at rows 4i..4i+3."""
    a, b, c, d = bounds.T
    rm = 0.5 * (a + b)
    zm = 0.5 * (c + d)
    out = np.empty((bounds.shape[0], 4, 4))
    out[:, 0] = np.stack([a, rm, c, zm], axis=1)
    out[:, 1] = np.stack([a, rm, zm, d], axis=1)
    out[:, 2] = np.stack([rm, b, c, zm], axis=1)
    out[:, 3] = np.stack([rm, b, zm, d], axis=1)
    return out.reshape(-1, 4)


def _straddles_cone(bounds: np.ndarray) -> np.ndarray:
    # The integrand changes sign across r = sqrt(2)*|z|; panels crossing
    # that cone get refinement priority. r - sqrt(2)*|z| takes both signs
    # on a panel iff its extremes bracket zero.
    a, b, c, d = bounds.T
    abs_z_lo = np.where((c < 0) & (d > 0), 0.0,
                        np.minimum(np.abs(c), np.abs(d)))
    abs_z_hi = np.maximum(np.abs(c), np.abs(d))
    return (a - _SQRT2 * abs_z_hi < 0.0) & (b - _SQRT2 * abs_z_lo > 0.0)


def _adaptive_quadrature(r_lo, r_hi, z_lo, z_hi, rel_tol) -> float:
    if r_hi <= r_lo or z_hi <= z_lo:
        return 0.0

    # Each node holds a panel's rule value and the values of its 2x2 split;
    # |split sum - panel value| is the local error estimate and the split
    # sum the working value, so estimates shrink at the full rule order per
    # subdivision level.
    parent_bounds = np.array([[r_lo, r_hi, z_lo, z_hi]])
    parent_values = _panel_rule(parent_bounds)
    child_bounds = _split4(parent_bounds)
    child_values = _panel_rule(child_bounds)
    child_bounds = child_bounds.reshape(1, 4, 4)
    child_values = child_values.reshape(1, 4)
    values = child_values.sum(axis=1)
    errors = np.abs(values - parent_values)
    panels_used = 5

    while True:
        total = float(values.sum())
        total_err = float(errors.sum())
        if total_err <= rel_tol * abs(total):
            break
        if panels_used >= QUADRATURE_PANEL_BUDGET:
            raise QuadratureNoConvergence(
                f"error estimate {total_err:.3e} still above "
                f"{rel_tol:.1e} * |{total:.6e}| after {panels_used} panels",
                estimate=total, error=total_err)

        # Refine the highest-priority nodes covering half the error mass.
        priority = errors * np.where(
            _straddles_cone(child_bounds.reshape(-1, 4)).reshape(-1, 4).any(axis=1),
            4.0, 1.0)
        order = np.argsort(-priority, kind="stable")
        cum = np.cumsum(errors[order])
        n_refine = int(np.searchsorted(cum, 0.5 * total_err)) + 1
        refine = order[:n_refine]
        keep = order[n_refine:]

        new_parent_bounds = child_bounds[refine].reshape(-1, 4)
        new_parent_values = child_values[refine].reshape(-1)
        new_child_bounds = _split4(new_parent_bounds)
        new_child_values = _panel_rule(new_child_bounds)
        panels_used += new_child_bounds.shape[0]
        new_child_bounds = new_child_bounds.reshape(-1, 4, 4)
        new_child_values = new_child_values.reshape(-1, 4)
        new_values = new_child_values.sum(axis=1)
        new_errors = np.abs(new_values - new_parent_values)

        child_bounds = np.concatenate([child_bounds[keep], new_child_bounds])
        child_values = np.concatenate([child_values[keep], new_child_values])
        values = np.concatenate([values[keep], new_values])
        errors = np.concatenate([errors[keep], new_errors])

    # Compensated summation of the leaf values: heavily cancelling
    # integrands (wide flat columns) would lose accuracy in a plain sum.
    return math.fsum(child_values.ravel().tolist())


def region_integral_quadrature(geom: Geometry, rel_tol: float = 1e-9) -> float:
    """Adaptive-quadrature evaluation of the region integral (oracle path).

    Subdivides panels in the (r, z) half-plane, steered by an embedded
    coarse/fine Gauss rule difference with extra priority for panels that
    straddle the magic-angle cone where the integrand changes sign.

    Raises QuadratureNoConvergence if the global error estimate is still
    above rel_tol * |integral| after the panel budget is spent.
    """
    if not _REL_TOL_RANGE[0] <= rel_tol <= _REL_TOL_RANGE[1]:
        raise ValueError(f"rel_tol must lie in {_REL_TOL_RANGE}, got {rel_tol}")
    if volume(geom) == 0.0:
        return 0.0
    if isinstance(geom, ColumnGeometry):
        return _adaptive_quadrature(0.0, geom.r_max, geom.z_min, geom.z_max, rel_tol)
    if isinstance(geom, CylinderGeometry):
        return _adaptive_quadrature(geom.r_min, geom.r_max,
                                    -geom.z_max, geom.z_max, rel_tol)
    raise TypeError(f"not a geometry: {geom!r}")
