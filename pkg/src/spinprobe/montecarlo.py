"""Stochastic simulation of the echo protocol as a check on the analytic uncertainties.

Density-matrix evolution with pure dephasing, projective sigma_y readout,
and repetition statistics. Outcome counts over the repetitions of one
experiment are aggregated with exact binomial draws, so ensembles of 10^5
spins stay desk-scale. All randomness comes from counter-based Philox
streams keyed by (seed, stream index): shot k uses stream k, ensemble
positions use a reserved stream, and results are independent of execution
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroSignal
from .geometry import (ColumnGeometry, CylinderGeometry, Geometry, volume)
from .physics import (DEFAULT_CONSTANTS, DipoleCoupling, PhysicalConstants,
                      Position, angular_factor_grid, as_position,
                      dipole_coupling, spin_sign)
from .sensing import (EchoProtocol, ProbeSpinParams,
                      ensemble_uncertainty, single_probe_uncertainty)

SPIN_CAP = 1_000_000       # above this many spins, aggregate by field value
FIELD_BINS = 10_000        # spatial bins used for the aggregation
_POSITION_STREAM = 2 ** 63  # reserved stream index; shots use 0..shots-1

ESTIMATORS = ("linearized", "arcsine")

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


class QubitState:
    """A 2x2 density matrix with the protocol steps as pure methods."""

    __slots__ = ("rho",)

    def __init__(self, rho):
        self.rho = np.asarray(rho, dtype=complex)
        if self.rho.shape != (2, 2):
            raise ValueError("density matrix must be 2x2")

    @classmethod
    def plus(cls) -> "QubitState":
        """|+><+|, the state after the initial pi/2 pulse."""
        return cls(np.full((2, 2), 0.5, dtype=complex))

    def expectation(self, op) -> float:
        return float(np.real(np.trace(self.rho @ op)))

    @property
    def sigma_y(self) -> float:
        return self.expectation(SIGMA_Y)

    def validate(self, atol: float = 1e-12) -> "QubitState":
        """Raise unless Hermitian, unit trace, and positive semidefinite."""
        if not np.allclose(self.rho, self.rho.conj().T, atol=atol):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(self.rho) - 1.0) > atol:
            raise ValueError("density matrix trace is not 1")
        eigs = np.linalg.eigvalsh(self.rho)
        if eigs.min() < -atol:
            raise ValueError(f"density matrix has negative eigenvalue {eigs.min()}")
        return self

    def dephased_precession(self, phase: float, decay: float) -> "QubitState":
        """Free evolution: coherences pick up exp(-i*phase) and shrink by decay."""
        rho = self.rho.copy()
        rho[1, 0] *= decay * np.exp(-1.0j * phase)
        rho[0, 1] *= decay * np.exp(+1.0j * phase)
        return QubitState(rho)

    def pi_pulse_x(self) -> "QubitState":
        """Instantaneous pi rotation about x."""
        return QubitState(SIGMA_X @ self.rho @ SIGMA_X)


@dataclass(frozen=True)
class McConfig:
    """Shot count, RNG seed, and estimator choice for a verification run."""

    shots: int
    seed: int = 0
    estimator: str = "linearized"
    spin_cap: int = SPIN_CAP
    field_bins: int = FIELD_BINS

    def __post_init__(self):
        if self.shots < 100:
            raise ValueError("shots must be at least 100")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.spin_cap < 1 or self.field_bins < 1:
            raise ValueError("spin_cap and field_bins must be positive")


@dataclass(frozen=True)
class McReport:
    """Empirical estimator statistics against the analytic prediction.

    z_score compares the empirical standard deviation of the estimate with
    the analytic delta, in units of the standard error of a sample standard
    deviation (analytic / sqrt(2*(shots-1))).
    """

    empirical_mean: float
    empirical_std_of_estimate: float
    analytic_delta: float
    z_score: float
    shots: int
    n_repetitions: int
    n_spins: int | None = None

    @property
    def passed(self) -> bool:
        return self.z_score < 3.0


def stream(seed: int, index: int) -> np.random.Generator:
    """Philox generator for (seed, stream index); fully determined by the pair."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def evolve_echo(field_t: float, t_i: float, params: ProbeSpinParams,
                constants: PhysicalConstants = DEFAULT_CONSTANTS) -> QubitState:
    """Run the echo sequence on the density matrix and return the final state.

    Prepare |+>, evolve for t_i/2 under a field of magnitude field_t with
    dephasing rate 1/T2, apply the pi pulse about x while the field flips
    sign (the target spin is flipped in the real protocol), evolve for the
    second half. Every step is validated as a physical density matrix.
    """
    if t_i <= 0:
        raise ValueError("t_i must be strictly positive")
    half_phase = params.g_e * constants.muB * field_t * (t_i / 2.0) / constants.hbar
    half_decay = math.exp(-(t_i / 2.0) / params.T2)
    state = QubitState.plus().validate()
    state = state.dephased_precession(half_phase, half_decay).validate()
    state = state.pi_pulse_x().validate()
    state = state.dephased_precession(-half_phase, half_decay).validate()
    return state


def sample_sigma_y(state: QubitState, shots: int, seed: int) -> np.ndarray:
    """Projective sigma_y outcomes (+1/-1) drawn with P(+1) = (1 + <sigma_y>)/2."""
    p_plus = min(max(0.5 * (1.0 + state.sigma_y), 0.0), 1.0)
    rng = stream(seed, 0)
    return np.where(rng.random(shots) < p_plus, 1, -1)


def _plus_probability(phase, decay):
    # P(+1) per spin given its accumulated echo phase; exact sine, not the
    # linearization the estimator uses.
    return np.clip(0.5 * (1.0 + decay * np.sin(phase)), 0.0, 1.0)


def _apply_estimator(mean_per_rep, slope, decay, phase_scale, estimator):
    if estimator == "linearized":
        return mean_per_rep / slope
    # arcsine: invert the sine before dividing out the phase slope; useful
    # once the accumulated phase is no longer small.
    normalized = np.clip(mean_per_rep / decay, -1.0, 1.0)
    return np.arcsin(normalized) / phase_scale


def simulate_single_estimates(p, s, protocol: EchoProtocol,
                              params: ProbeSpinParams,
                              constants: PhysicalConstants = DEFAULT_CONSTANTS,
                              coupling: DipoleCoupling | None = None,
                              shots: int = 300, seed: int = 0,
                              estimator: str = "linearized") -> np.ndarray:
    """`shots` independent estimates of s from one probe spin at position p.

    Each estimate aggregates floor(T/t_i) echo repetitions; repetition
    outcomes are summed through one exact binomial draw per shot.
    """
    if coupling is None:
        coupling = dipole_coupling(constants)
    sign = spin_sign(s)
    analytic = single_probe_uncertainty(p, protocol.t_i, protocol.t_total,
                                        params, constants, coupling)
    n_rep = protocol.n_repetitions
    decay = math.exp(-protocol.t_i / params.T2)
    phase_scale = analytic.signal / decay      # phase per unit s
    p_plus = _plus_probability(phase_scale * sign, decay)

    estimates = np.empty(shots)
    for k in range(shots):
        successes = stream(seed, k).binomial(n_rep, p_plus)
        mean_per_rep = (2.0 * successes - n_rep) / n_rep
        estimates[k] = _apply_estimator(mean_per_rep, analytic.signal, decay,
                                        phase_scale, estimator)
    return estimates


def _sample_positions(geom: Geometry, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Uniform (r, z) samples over the region; theta is irrelevant to the field."""
    u = rng.random(n)
    v = rng.random(n)
    if isinstance(geom, ColumnGeometry):
        r = geom.r_max * np.sqrt(u)
        z = geom.z_min + (geom.z_max - geom.z_min) * v
    else:
        r = np.sqrt(geom.r_min ** 2 + (geom.r_max ** 2 - geom.r_min ** 2) * u)
        z = -geom.z_max + 2.0 * geom.z_max * v
    return r, z


def _binned_positions(geom: Geometry, n_spins: int, field_bins: int
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equal-volume spatial bins with deterministic spin counts summing to n_spins."""
    n_r = max(1, int(math.sqrt(field_bins)))
    n_z = max(1, field_bins // n_r)
    u = (np.arange(n_r) + 0.5) / n_r
    v = (np.arange(n_z) + 0.5) / n_z
    uu, vv = np.meshgrid(u, v, indexing="ij")
    uu, vv = uu.ravel(), vv.ravel()
    if isinstance(geom, ColumnGeometry):
        r = geom.r_max * np.sqrt(uu)
        z = geom.z_min + (geom.z_max - geom.z_min) * vv
    else:
        r = np.sqrt(geom.r_min ** 2 + (geom.r_max ** 2 - geom.r_min ** 2) * uu)
        z = -geom.z_max + 2.0 * geom.z_max * vv
    n_bins = r.size
    counts = np.full(n_bins, n_spins // n_bins, dtype=np.int64)
    counts[: n_spins % n_bins] += 1
    return r, z, counts


def simulate_ensemble_estimates(geom: Geometry, s, protocol: EchoProtocol,
                                params: ProbeSpinParams,
                                constants: PhysicalConstants = DEFAULT_CONSTANTS,
                                coupling: DipoleCoupling | None = None,
                                shots: int = 300, seed: int = 0,
                                estimator: str = "linearized",
                                spin_cap: int = SPIN_CAP,
                                field_bins: int = FIELD_BINS,
                                positions=None) -> np.ndarray:
    """`shots` independent estimates of s from a probe-spin ensemble.

    The ensemble layout is drawn once (stream `_POSITION_STREAM`) and held
    fixed across shots, like a fabricated sample. Above `spin_cap` spins the
    layout switches to `field_bins` equal-volume bins whose occupants share
    one field value. With an explicit `positions` list ([(x, y, z), ...])
    the estimator slope is the discrete sum over those spins instead of the
    continuous-limit integral.
    """
    if coupling is None:
        coupling = dipole_coupling(constants)
    sign = spin_sign(s)
    n_rep = protocol.n_repetitions
    decay = math.exp(-protocol.t_i / params.T2)
    g = coupling.omega_um3

    if positions is not None:
        pos = [as_position(p) for p in positions]
        f = angular_factor_grid(np.array([q.x for q in pos]),
                                np.array([q.y for q in pos]),
                                np.array([q.z for q in pos]))
        counts = np.ones(len(pos), dtype=np.int64)
        slope = decay * 2.0 * g * float(np.sum(f)) * protocol.t_i
        if abs(slope) == 0.0:
            raise ZeroSignal("explicit positions produce zero net signal")
    else:
        analytic = ensemble_uncertainty(geom, protocol.t_i, protocol.t_total,
                                        params, constants, coupling)
        slope = analytic.signal
        n_spins = int(round(params.rho * volume(geom)))
        if n_spins < 1:
            raise ZeroSignal(f"region {geom} holds no probe spins at "
                             f"density {params.rho}/um^3")
        if n_spins <= spin_cap:
            r, z = _sample_positions(geom, n_spins, stream(seed, _POSITION_STREAM))
            counts = np.ones(n_spins, dtype=np.int64)
        else:
            r, z, counts = _binned_positions(geom, n_spins, field_bins)
        f = angular_factor_grid(r, np.zeros_like(r), z)

    n_total = int(counts.sum())
    phase = 2.0 * g * f * sign * protocol.t_i
    p_plus = _plus_probability(phase, decay)
    trials_per_group = n_rep * counts

    phase_scale = slope / decay
    estimates = np.empty(shots)
    for k in range(shots):
        successes = stream(seed, k).binomial(trials_per_group, p_plus)
        total = 2.0 * successes.sum() - n_rep * n_total
        mean_per_rep = total / n_rep
        estimates[k] = _apply_estimator(mean_per_rep, slope, decay,
                                        phase_scale, estimator)
    return estimates


def verify_uncertainty(target, protocol: EchoProtocol,
                       params: ProbeSpinParams,
                       constants: PhysicalConstants = DEFAULT_CONSTANTS,
                       mc: McConfig = McConfig(shots=300),
                       s=+1,
                       coupling: DipoleCoupling | None = None) -> McReport:
    """Monte Carlo check of the analytic uncertainty for a single probe or ensemble.

    `target` is a probe position (single-spin path) or a Geometry (ensemble
    path). The empirical standard deviation of the estimate over mc.shots
    simulated experiments is compared against the analytic delta evaluated
    at the integer repetition count floor(T/t_i).
    """
    if coupling is None:
        coupling = dipole_coupling(constants)
    n_rep = protocol.n_repetitions
    if isinstance(target, (ColumnGeometry, CylinderGeometry)):
        analytic = ensemble_uncertainty(target, protocol.t_i, protocol.t_total,
                                        params, constants, coupling)
        n_spins = int(round(params.rho * volume(target)))
        noise = math.sqrt(n_spins)
        estimates = simulate_ensemble_estimates(
            target, s, protocol, params, constants, coupling,
            shots=mc.shots, seed=mc.seed, estimator=mc.estimator,
            spin_cap=mc.spin_cap, field_bins=mc.field_bins)
    else:
        analytic = single_probe_uncertainty(as_position(target), protocol.t_i,
                                            protocol.t_total, params,
                                            constants, coupling)
        n_spins = None
        noise = analytic.noise
        estimates = simulate_single_estimates(
            target, s, protocol, params, constants, coupling,
            shots=mc.shots, seed=mc.seed, estimator=mc.estimator)

    analytic_delta = noise / (abs(analytic.signal) * math.sqrt(n_rep))
    emp_std = float(np.std(estimates, ddof=1))
    std_err = analytic_delta / math.sqrt(2.0 * (mc.shots - 1))
    return McReport(empirical_mean=float(np.mean(estimates)),
                    empirical_std_of_estimate=emp_std,
                    analytic_delta=analytic_delta,
                    z_score=abs(emp_std - analytic_delta) / std_err,
                    shots=mc.shots, n_repetitions=n_rep, n_spins=n_spins)
