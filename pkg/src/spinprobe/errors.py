"""Exception types shared across the toolkit."""


class SpinProbeError(Exception):
    """Base class for every error raised by spinprobe."""


class SingularPosition(SpinProbeError):
    """Probe position coincides with (or is unphysically close to) the target spin."""


class MagicAngle(SpinProbeError):
    """Probe sits on the magic-angle cone: the secular dipolar signal vanishes."""


class ZeroSignal(SpinProbeError):
    """Ensemble region has zero volume or zero net dipolar signal."""


class InvalidProtocol(SpinProbeError):
    """Echo timing violates 0 < t_I <= T."""


class QuadratureNoConvergence(SpinProbeError):
    """Adaptive quadrature exhausted its panel budget above the requested tolerance."""

    def __init__(self, message: str, estimate: float | None = None,
                 error: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class NoFeasiblePoint(SpinProbeError):
    """Every candidate point of the optimizer grid violated the geometry invariants."""


class ConfigError(SpinProbeError):
    """Run configuration is malformed: unknown key, wrong type, or non-positive value."""
