"""Exception taxonomy shared by all engines."""


class MirrorQedError(Exception):
    """Base class for all package errors."""


class ConfigError(MirrorQedError):
    """Invalid physical configuration.

    Carries a list of (field, kind, message) violation records so callers
    can report every problem at once instead of the first one hit.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{f}: {m}" for f, _, m in self.violations)
        super().__init__(f"invalid configuration: {lines}")


class NegativeRate(ConfigError):
    pass


class ZeroMirrorRate(ConfigError):
    pass


class PhaseOutOfRange(ConfigError):
    pass


class ZeroDelay(MirrorQedError):
    """Operation needs tau > 0 (cavity modes are undefined at zero delay)."""


class SingularDenominator(MirrorQedError):
    """|1 - r1^2 e^{2ikL}| fell below threshold; value is not evaluated."""

    def __init__(self, omega, magnitude, threshold=1e-14):
        self.omega = omega
        self.magnitude = magnitude
        self.threshold = threshold
        super().__init__(
            f"singular cavity denominator at omega={omega}: "
            f"|1 - r1^2 e^(2ikL)| = {magnitude:.3e} < {threshold:.0e}"
        )


class OverflowGuard(MirrorQedError):
    """Analytic continuation e^{i omega tau} would overflow (tau*|Im omega| > 50)."""


class NonConvergence(MirrorQedError):
    """Newton iteration failed for one seed; reported per seed, not fatal."""


class WindingMismatch(MirrorQedError):
    """Contour winding count disagrees with the number of accepted poles."""

    def __init__(self, winding, n_poles, rectangle):
        self.winding = winding
        self.n_poles = n_poles
        self.rectangle = rectangle
        super().__init__(
            f"argument principle counts {winding} zeros in {rectangle} "
            f"but {n_poles} poles were accepted"
        )


class LostTrack(MirrorQedError):
    """Pole continuation failed even after bisecting the tau step."""

    def __init__(self, tau_last_good, message=""):
        self.tau_last_good = tau_last_good
        super().__init__(
            f"pole continuation lost track after tau={tau_last_good:g}. {message}"
        )


class MisalignedDelay(MirrorQedError):
    """tau/dt must be an even integer so tau/2 is bin aligned."""


class StepTooCoarse(MirrorQedError):
    """Time step too large for the requested accuracy."""


class TruncationOverflow(MirrorQedError):
    """chi_max is binding and one step discarded more than allowed weight."""

    def __init__(self, step, discarded, limit=1e-6):
        self.step = step
        self.discarded = discarded
        super().__init__(
            f"step {step}: bond cap binding, discarded weight {discarded:.3e} > {limit:.0e}"
        )


class DimensionTooLarge(MirrorQedError):
    """Dense oracle sector exceeds its size guard."""


class InvariantBreach(MirrorQedError):
    """A conservation or causality invariant failed during evolution."""

    def __init__(self, step, name, detail):
        self.step = step
        self.name = name
        self.detail = detail
        super().__init__(f"step {step}: {name} invariant breached ({detail})")
