"""Geometry optimization at fixed standoff, and standoff sweeps.

Deterministic two-stage search for the (r_max, z_max) that maximize the
single-vs-ensemble sensitivity ratio: a log-spaced coarse grid followed by
Nelder-Mead refinement in log-parameter space. No randomized restarts, so
identical inputs always give identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoFeasiblePoint, ZeroSignal
from .geometry import ColumnGeometry, CylinderGeometry, Geometry
from .physics import DEFAULT_CONSTANTS, DipoleCoupling, PhysicalConstants
from .sensing import (ProbeSpinParams, ensemble_uncertainty,
                      optimal_interrogation_time, sensitivity_ratio)

GRID_POINTS = 60
GRID_SPAN = 100.0              # grid covers [standoff/SPAN, standoff*SPAN]
SIMPLEX_DIAMETER_UM = 1e-4     # refinement stops below this extent per coordinate
MAX_REFINE_ITERATIONS = 500

SHAPES = ("column", "cylinder")


@dataclass(frozen=True)
class OptimizationResult:
    """Best geometry found for one standoff."""

    best_r_max: float
    best_z_max: float
    best_ratio: float
    evaluations: int
    converged: bool
    grid_stage_best: tuple[float, float, float]   # (r_max, z_max, ratio)


@dataclass(frozen=True)
class SweepRow:
    """One standoff of a sweep: the optimized geometry and its ratio.

    delta_s_ens is filled in absolute mode only; failed marks rows whose
    optimization raised instead of returning.
    """

    standoff: float
    opt_r_max: float
    opt_z_max: float
    ratio: float
    delta_s_ens: float | None = None
    failed: bool = False


def make_geometry(shape: str, standoff: float, r_max: float, z_max: float) -> Geometry:
    """Build a geometry from the optimizer's free parameters.

    For a column the standoff is z_min; for a cylinder it is the hole
    radius r_min and z_max is the half-height. Raises ValueError when the
    parameters violate the geometry invariants.
    """
    if shape == "column":
        return ColumnGeometry(z_min=standoff, z_max=z_max, r_max=r_max)
    if shape == "cylinder":
        return CylinderGeometry(r_min=standoff, r_max=r_max, z_max=z_max)
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def optimize_geometry(shape: str, standoff: float,
                      params_single: ProbeSpinParams,
                      params_ens: ProbeSpinParams,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS,
                      coupling: DipoleCoupling | None = None
                      ) -> OptimizationResult:
    """Maximize the sensitivity ratio over (r_max, z_max) at fixed standoff.

    Stage 1 scans a GRID_POINTS x GRID_POINTS log grid spanning
    [standoff/100, standoff*100] on both axes (ties broken toward the
    lexicographically smallest (r_max, z_max)). Stage 2 refines with a
    Nelder-Mead simplex on (log r_max, log z_max) until its extent drops
    below SIMPLEX_DIAMETER_UM in both physical coordinates or the
    iteration cap is hit. The refined result is never worse than the grid
    optimum.
    """
    if standoff <= 0:
        raise ValueError("standoff must be strictly positive")

    evaluations = 0

    def ratio_at(r_max: float, z_max: float) -> float:
        nonlocal evaluations
        evaluations += 1
        try:
            geom = make_geometry(shape, standoff, r_max, z_max)
            return sensitivity_ratio(geom, params_single, params_ens,
                                     1.0, constants, coupling)
        except (ValueError, ZeroSignal):
            return -math.inf

    axis = np.geomspace(standoff / GRID_SPAN, standoff * GRID_SPAN, GRID_POINTS)
    best_r = best_z = math.nan
    best_ratio = -math.inf
    for r in axis:
        for z in axis:
            ratio = ratio_at(float(r), float(z))
            if ratio > best_ratio:
                best_r, best_z, best_ratio = float(r), float(z), ratio
    if not math.isfinite(best_ratio):
        raise NoFeasiblePoint(
            f"no feasible (r_max, z_max) on the grid for {shape} at "
            f"standoff {standoff} um")
    grid_best = (best_r, best_z, best_ratio)

    x_best, ratio_best, converged = _nelder_mead_log(
        ratio_at, (math.log(best_r), math.log(best_z)),
        step=0.5 * math.log(axis[1] / axis[0]))

    if ratio_best >= best_ratio:
        best_r, best_z = math.exp(x_best[0]), math.exp(x_best[1])
        best_ratio = ratio_best

    return OptimizationResult(best_r_max=best_r, best_z_max=best_z,
                              best_ratio=best_ratio, evaluations=evaluations,
                              converged=converged, grid_stage_best=grid_best)


def _simplex_extent(simplex) -> tuple[float, float]:
    # Extent of the simplex in physical (um) coordinates, per coordinate.
    pts = [(math.exp(x[0]), math.exp(x[1])) for x in simplex]
    dr = max(p[0] for p in pts) - min(p[0] for p in pts)
    dz = max(p[1] for p in pts) - min(p[1] for p in pts)
    return dr, dz


def _nelder_mead_log(ratio_at, x0, step, alpha=1.0, gamma=2.0, beta=0.5,
                     sigma=0.5):
    """Maximize ratio_at(exp(x), exp(y)) by Nelder-Mead on (x, y).

    Classic reflection/expansion/contraction/shrink moves; terminates when
    the simplex extent in um falls below SIMPLEX_DIAMETER_UM in both
    coordinates (converged) or after MAX_REFINE_ITERATIONS (not converged).
    Returns (best point, best value, converged).
    """

    def score(x):
        return ratio_at(math.exp(x[0]), math.exp(x[1]))

    simplex = [np.array(x0, dtype=float),
               np.array([x0[0] + step, x0[1]]),
               np.array([x0[0], x0[1] + step])]
    values = [score(x) for x in simplex]

    converged = False
    for _ in range(MAX_REFINE_ITERATIONS):
        order = sorted(range(3), key=lambda i: -values[i])
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]

        dr, dz = _simplex_extent(simplex)
        if dr < SIMPLEX_DIAMETER_UM and dz < SIMPLEX_DIAMETER_UM:
            converged = True
            break

        centroid = 0.5 * (simplex[0] + simplex[1])
        reflected = centroid + alpha * (centroid - simplex[2])
        v_ref = score(reflected)
        if v_ref > values[0]:
            expanded = centroid + gamma * (centroid - simplex[2])
            v_exp = score(expanded)
            if v_exp > v_ref:
                simplex[2], values[2] = expanded, v_exp
            else:
                simplex[2], values[2] = reflected, v_ref
        elif v_ref > values[1]:
            simplex[2], values[2] = reflected, v_ref
        else:
            contracted = centroid + beta * (simplex[2] - centroid)
            v_con = score(contracted)
            if v_con > values[2]:
                simplex[2], values[2] = contracted, v_con
            else:
                for i in (1, 2):
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    values[i] = score(simplex[i])

    order = sorted(range(3), key=lambda i: -values[i])
    return simplex[order[0]], values[order[0]], converged


def sweep_standoff(shape: str, standoffs, mode: str, t_total: float,
                   params_single: ProbeSpinParams,
                   params_ens: ProbeSpinParams,
                   constants: PhysicalConstants = DEFAULT_CONSTANTS,
                   coupling: DipoleCoupling | None = None) -> list[SweepRow]:
    """Optimize the geometry at each standoff; one SweepRow per standoff.

    mode "ratio" records the optimized ratio only; mode "absolute"
    additionally evaluates the ensemble uncertainty at the optimal geometry
    for the budget t_total. Failed optimizations mark their row and the
    sweep continues.
    """
    standoffs = [float(d) for d in standoffs]
    if not standoffs:
        raise ValueError("standoffs must be nonempty")
    if any(d <= 0 for d in standoffs):
        raise ValueError("standoffs must be strictly positive")
    if any(b <= a for a, b in zip(standoffs, standoffs[1:])):
        raise ValueError("standoffs must be sorted strictly ascending")
    if mode not in ("ratio", "absolute"):
        raise ValueError(f"mode must be 'ratio' or 'absolute', got {mode!r}")

    rows = []
    for d in standoffs:
        try:
            opt = optimize_geometry(shape, d, params_single, params_ens,
                                    constants, coupling)
            delta = None
            if mode == "absolute":
                geom = make_geometry(shape, d, opt.best_r_max, opt.best_z_max)
                delta = ensemble_uncertainty(
                    geom, optimal_interrogation_time(params_ens), t_total,
                    params_ens, constants, coupling).delta
            rows.append(SweepRow(standoff=d, opt_r_max=opt.best_r_max,
                                 opt_z_max=opt.best_z_max,
                                 ratio=opt.best_ratio, delta_s_ens=delta))
        except (NoFeasiblePoint, ZeroSignal, ValueError):
            rows.append(SweepRow(standoff=d, opt_r_max=math.nan,
                                 opt_z_max=math.nan, ratio=math.nan,
                                 failed=True))
    return rows


def crossover_standoff(rows: list[SweepRow]) -> float | None:
    """Standoff where the sweep's ratio crosses 1, or None if it never does.

    Interpolates linearly in (log standoff, log ratio) between the first
    adjacent pair of non-failed rows bracketing ratio = 1, matching how the
    crossover is read off a log-log sweep plot.
    """
    ok = [r for r in rows if not r.failed and math.isfinite(r.ratio) and r.ratio > 0]
    for a, b in zip(ok, ok[1:]):
        if a.ratio == 1.0:
            return a.standoff
        if (a.ratio - 1.0) * (b.ratio - 1.0) < 0:
            la, lb = math.log(a.standoff), math.log(b.standoff)
            ra, rb = math.log(a.ratio), math.log(b.ratio)
            return math.exp(la - ra * (lb - la) / (rb - ra))
    if ok and ok[-1].ratio == 1.0:
        return ok[-1].standoff
    return None
