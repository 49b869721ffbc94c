"""Physical configuration shared by the classical and quantum engines.

Unit convention: the probe decay rate gamma_p sets the rate unit (gamma_p = 1
in canonical configs), times are in 1/gamma_p and frequencies in gamma_p.
``tau`` is the one-way mirror-to-mirror delay; the round trip is ``2 tau`` and
the cavity free spectral range is ``pi / tau``.  The probe sits exactly at the
cavity center, so the probe-mirror delay is ``tau / 2`` by construction.

The carrier frequency never enters the dynamics directly; only the phase
``omega0 * tau (mod 2 pi)`` does.  For the classical (non-RWA) formulas an
explicit carrier is still needed, so validation constructs an exact
``omega0 = (2 pi m + phase) / tau`` close to ``omega0_over_gp * gamma_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError, NegativeRate, PhaseOutOfRange, ZeroDelay, ZeroMirrorRate

TWO_PI = 2.0 * math.pi

MIRROR1 = "mirror1"
PROBE = "probe"
MIRROR2 = "mirror2"


@dataclass(frozen=True)
class QubitSpec:
    """Decay rates and detuning of one qubit.

    gamma_l / gamma_r are the decay rates into left- and right-moving modes;
    the total spontaneous rate is their sum.  detuning is relative to the
    probe (= carrier) frequency.
    """

    label: str
    gamma_l: float
    gamma_r: float
    detuning: float = 0.0

    @property
    def gamma(self) -> float:
        return self.gamma_l + self.gamma_r


@dataclass(frozen=True)
class SystemConfig:
    """Raw, unvalidated system description.

    mirror is applied to both mirror qubits (they are identical); the probe
    is geometrically centered.  omega0_tau_phase is omega0*tau mod 2pi.
    """

    mirror: QubitSpec
    probe: QubitSpec
    tau: float
    omega0_tau_phase: float = math.pi
    omega0_over_gp: float = 1.0e4
    mirror_detuning: float = 0.0
    mirror_phase: float = 0.0  # phi(x_d) of r1; 0 throughout (retained as a dial)


@dataclass(frozen=True)
class DerivedScales:
    """Scales computed from a validated config."""

    g0: float       # vacuum coupling sqrt(2 gamma_m gamma_p) / 2
    fsr: float      # free spectral range pi / tau (inf at tau = 0)
    tau_rt: float   # round-trip time 2 tau


@dataclass(frozen=True)
class ValidatedConfig:
    """Config that passed validation, plus derived quantities.

    Immutable; safe to share across workers.  omega0 satisfies
    omega0 * tau mod 2pi == omega0_tau_phase exactly (up to fp rounding)
    and omega0 ~= omega0_over_gp * gamma_p.
    """

    mirror: QubitSpec
    probe: QubitSpec
    tau: float
    omega0_tau_phase: float
    omega0_over_gp: float
    mirror_detuning: float
    mirror_phase: float
    omega0: float
    scales: DerivedScales
    markovian_limit: bool

    @property
    def gamma_m(self) -> float:
        return self.mirror.gamma

    @property
    def gamma_p(self) -> float:
        return self.probe.gamma

    @property
    def g0(self) -> float:
        return self.scales.g0

    @property
    def half_phase(self) -> float:
        """Propagation phase over half the mirror spacing, omega0*tau/2 branch."""
        return 0.5 * self.omega0_tau_phase

    def qubits(self) -> tuple[QubitSpec, QubitSpec, QubitSpec]:
        """The three qubits in spatial order (mirror1, probe, mirror2)."""
        m = replace(self.mirror, detuning=self.mirror_detuning)
        return (
            replace(m, label=MIRROR1),
            replace(self.probe, label=PROBE),
            replace(m, label=MIRROR2),
        )


_KIND_TO_ERROR = {
    "negative_rate": NegativeRate,
    "zero_mirror_rate": ZeroMirrorRate,
    "phase_out_of_range": PhaseOutOfRange,
}


def validate(config: SystemConfig) -> ValidatedConfig:
    """Check a SystemConfig and attach derived scales.

    Raises ConfigError (or the specific subclass when all violations share a
    kind) with the full list of (field, kind, message) violations.
    """
    v: list[tuple[str, str, str]] = []

    for q, name in ((config.mirror, "mirror"), (config.probe, "probe")):
        if q.gamma_l < 0:
            v.append((f"{name}.gamma_l", "negative_rate", f"{q.gamma_l} < 0"))
        if q.gamma_r < 0:
            v.append((f"{name}.gamma_r", "negative_rate", f"{q.gamma_r} < 0"))
    if config.mirror.gamma_l >= 0 and config.mirror.gamma_r >= 0 and config.mirror.gamma == 0:
        v.append(("mirror", "zero_mirror_rate", "mirror qubits need gamma_l + gamma_r > 0"))
    if config.probe.gamma < 0:
        v.append(("probe", "negative_rate", "total probe rate < 0"))
    if config.probe.detuning != 0.0:
        v.append(("probe.detuning", "probe_not_reference",
                  "the probe defines the frequency reference; its detuning must be 0"))
    if config.tau < 0:
        v.append(("tau", "negative_delay", f"tau = {config.tau} < 0"))
    if not (0.0 <= config.omega0_tau_phase < TWO_PI):
        v.append(("omega0_tau_phase", "phase_out_of_range",
                  f"{config.omega0_tau_phase} not in [0, 2pi)"))
    if config.omega0_over_gp < 100.0:
        v.append(("omega0_over_gp", "warning_carrier_too_small",
                  f"{config.omega0_over_gp} < 100 leaves the RWA-comparison regime"))

    if v:
        kinds = {kind for _, kind, _ in v}
        cls = _KIND_TO_ERROR.get(kinds.pop(), ConfigError) if len(kinds) == 1 else ConfigError
        raise cls(v)

    gamma_p = config.probe.gamma
    gamma_m = config.mirror.gamma
    markovian = config.tau == 0.0

    if markovian:
        omega0 = config.omega0_over_gp * (gamma_p if gamma_p > 0 else 1.0)
        phase = 0.0
        fsr = math.inf
    else:
        target = config.omega0_over_gp * (gamma_p if gamma_p > 0 else 1.0)
        phase = config.omega0_tau_phase
        m = max(1, round((target * config.tau - phase) / TWO_PI))
        omega0 = (TWO_PI * m + phase) / config.tau
        fsr = math.pi / config.tau

    scales = DerivedScales(
        g0=0.5 * math.sqrt(2.0 * gamma_m * gamma_p),
        fsr=fsr,
        tau_rt=2.0 * config.tau,
    )
    return ValidatedConfig(
        mirror=config.mirror,
        probe=config.probe,
        tau=config.tau,
        omega0_tau_phase=phase,
        omega0_over_gp=config.omega0_over_gp,
        mirror_detuning=config.mirror_detuning,
        mirror_phase=config.mirror_phase,
        omega0=omega0,
        scales=scales,
        markovian_limit=markovian,
    )


def cavity_mode_frequency(config: ValidatedConfig, m: int) -> float:
    """Detuning of the m-th cavity mode from the carrier: m * pi / tau."""
    if config.tau <= 0.0:
        raise ZeroDelay("cavity modes are undefined at tau = 0")
    return m * math.pi / config.tau


def build_config(
    gamma_m: float = 10.0,
    gamma_p: float = 1.0,
    tau_gamma_m: float = 1.0,
    omega0_tau_phase: float = math.pi,
    omega0_over_gp: float = 1.0e4,
    delta_m: float = 0.0,
    probe_chirality: str = "sym",
    gamma_m_l: float | None = None,
    gamma_m_r: float | None = None,
    gamma_p_l: float | None = None,
    gamma_p_r: float | None = None,
) -> ValidatedConfig:
    """Convenience constructor used by the CLI and most tests.

    probe_chirality: 'sym' -> gamma_p/2 each way, 'L' -> all left,
    'R' -> all right; explicit gamma_p_l/gamma_p_r override it.
    Mirrors default to the symmetric split gamma_m/2.
    """
    if gamma_p_l is None and gamma_p_r is None:
        if probe_chirality == "sym":
            gamma_p_l = gamma_p_r = 0.5 * gamma_p
        elif probe_chirality == "L":
            gamma_p_l, gamma_p_r = gamma_p, 0.0
        elif probe_chirality == "R":
            gamma_p_l, gamma_p_r = 0.0, gamma_p
        else:
            raise ConfigError([("probe_chirality", "bad_value",
                                f"{probe_chirality!r} not one of sym/L/R")])
    else:
        gamma_p_l = 0.0 if gamma_p_l is None else gamma_p_l
        gamma_p_r = 0.0 if gamma_p_r is None else gamma_p_r
    if gamma_m_l is None and gamma_m_r is None:
        gamma_m_l = gamma_m_r = 0.5 * gamma_m
    else:
        gamma_m_l = 0.0 if gamma_m_l is None else gamma_m_l
        gamma_m_r = 0.0 if gamma_m_r is None else gamma_m_r

    if gamma_m > 0:
        tau = tau_gamma_m / gamma_m
    elif tau_gamma_m == 0:
        tau = 0.0
    else:
        raise ConfigError([("tau_gamma_m", "bad_value",
                            "tau_gamma_m > 0 requires gamma_m > 0")])

    cfg = SystemConfig(
        mirror=QubitSpec("mirror", gamma_m_l, gamma_m_r, detuning=delta_m),
        probe=QubitSpec("probe", gamma_p_l, gamma_p_r),
        tau=tau,
        omega0_tau_phase=omega0_tau_phase,
        omega0_over_gp=omega0_over_gp,
        mirror_detuning=delta_m,
    )
    return validate(cfg)


# --- configuration files -----------------------------------------------------

CONFIG_KEYS = (
    "gamma_m", "gamma_p",
    "gamma_p_L", "gamma_p_R", "gamma_m_L", "gamma_m_R",
    "tau_gamma_m", "omega0_tau_phase", "omega0_over_gp", "delta_m",
)


def _parse_value(key: str, raw: str) -> float:
    raw = raw.strip()
    if raw == "pi":
        return math.pi
    try:
        return float(raw)
    except ValueError:
        raise ConfigError([(key, "bad_value", f"cannot parse {raw!r} as a number")])


def read_config_file(path: str) -> ValidatedConfig:
    """Read a ``key = value`` config file (# starts a comment).

    Recognized keys: gamma_m, gamma_p, gamma_p_L, gamma_p_R, gamma_m_L,
    gamma_m_R, tau_gamma_m, omega0_tau_phase, omega0_over_gp, delta_m.
    Unknown keys are rejected.  Rates are in units of gamma_p, delays as
    tau * gamma_m, the phase in radians (the token ``pi`` is accepted).
    """
    values: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError([(f"line {lineno}", "bad_syntax",
                                    f"expected 'key = value', got {line!r}")])
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ConfigError([(key, "unknown_key",
                                    f"line {lineno}: not a recognized key")])
            values[key] = _parse_value(key, raw)

    kwargs = dict(
        gamma_m=values.get("gamma_m", 10.0),
        gamma_p=values.get("gamma_p", 1.0),
        tau_gamma_m=values.get("tau_gamma_m", 1.0),
        omega0_tau_phase=values.get("omega0_tau_phase", math.pi),
        omega0_over_gp=values.get("omega0_over_gp", 1.0e4),
        delta_m=values.get("delta_m", 0.0),
    )
    for src, dst in (("gamma_m_L", "gamma_m_l"), ("gamma_m_R", "gamma_m_r"),
                     ("gamma_p_L", "gamma_p_l"), ("gamma_p_R", "gamma_p_r")):
        if src in values:
            kwargs[dst] = values[src]
    return build_config(**kwargs)


def config_summary(config: ValidatedConfig) -> dict[str, float]:
    """Flat echo of a validated config (used by manifests)."""
    return {
        "gamma_m": config.gamma_m,
        "gamma_p": config.gamma_p,
        "gamma_m_L": config.mirror.gamma_l,
        "gamma_m_R": config.mirror.gamma_r,
        "gamma_p_L": config.probe.gamma_l,
        "gamma_p_R": config.probe.gamma_r,
        "tau": config.tau,
        "tau_gamma_m": config.tau * config.gamma_m,
        "omega0_tau_phase": config.omega0_tau_phase,
        "omega0_over_gp": config.omega0_over_gp,
        "omega0": config.omega0,
        "delta_m": config.mirror_detuning,
        "g0": config.scales.g0,
        "fsr": config.scales.fsr,
        "tau_rt": config.scales.tau_rt,
    }
