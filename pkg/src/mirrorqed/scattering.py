"""Exact classical response of the three-qubit waveguide system.

Single-qubit reflection/transmission, the composite two-mirror reflection,
the retardation-modified probe decay rate and the probe scattered field, all
from the closed-form Green-function solution.  The standalone coefficients
(`r1`, `t1`, `bare_polarizability`) take absolute frequencies; the
config-level responses take the detuning ``delta = omega - omega0`` from the
carrier, which keeps the arithmetic well conditioned at omega0/gamma_p ~ 1e4.

All responses accept complex frequencies (used by the pole finder); the
dispersionless mapping kL = omega * tau holds throughout, evaluated as
``exp(i (omega0 tau mod 2pi)) * exp(i delta tau)`` so the resonance phase is
exact no matter how large the carrier is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ValidatedConfig
from .errors import SingularDenominator

SINGULAR_THRESHOLD = 1e-14

SPECTRUM_KINDS = ("r1", "r2dots", "gamma_tilde", "scattered_field")


@dataclass
class ComplexSpectrum:
    """A response sampled on a strictly increasing real frequency grid.

    ``grid`` holds detunings from the carrier in units of gamma_p. Points
    where the response could not be evaluated carry NaN values and an entry
    in ``errors`` (grid index, message).
    """

    grid: np.ndarray
    values: np.ndarray
    kind: str
    errors: list[tuple[int, str]] = field(default_factory=list)


def bare_polarizability(omega, omega0, amplitude=1.0):
    """A0 omega^2 / (omega0^2 - omega^2); the pole at omega0 is the caller's
    problem (it surfaces as inf)."""
    omega = np.asarray(omega, dtype=complex)
    gap = (omega0 - omega) * (omega0 + omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = amplitude * omega * omega / gap
    return out[()] if out.ndim == 0 else out


def _gap(omega, omega0, rwa):
    """omega0^2 - omega^2, factored to avoid cancellation; RWA variant
    replaces it by 2 omega0 (omega0 - omega)."""
    if rwa:
        return 2.0 * omega0 * (omega0 - omega)
    return (omega0 - omega) * (omega0 + omega)


def r1(omega, omega0, gamma, phase=0.0, rwa=False):
    """Single-qubit reflection i omega0 gamma e^{i phi} / (omega0^2 - omega^2 - i omega0 gamma)."""
    omega = np.asarray(omega, dtype=complex)
    num = 1j * omega0 * gamma * np.exp(1j * phase)
    out = num / (_gap(omega, omega0, rwa) - 1j * omega0 * gamma)
    return out[()] if out.ndim == 0 else out


def t1(omega, omega0, gamma, rwa=False):
    """Single-qubit transmission; equals 1 + r1 at zero mirror phase."""
    omega = np.asarray(omega, dtype=complex)
    gap = _gap(omega, omega0, rwa)
    out = gap / (gap - 1j * omega0 * gamma)
    return out[()] if out.ndim == 0 else out


# --- config-level responses (argument = detuning from the carrier) ----------

def _mirror_r1(delta, config: ValidatedConfig, rwa: bool):
    """r1 of one mirror qubit at omega = omega0 + delta.

    The mirror resonance sits at omega0 + delta_m, so the resonance gap is
    (delta_m - delta)(2 omega0 + delta_m + delta), exact for small detunings.
    """
    w0 = config.omega0
    dm = config.mirror_detuning
    gm = config.gamma_m
    wm = w0 + dm
    if rwa:
        gap = 2.0 * wm * (dm - delta)
    else:
        gap = (dm - delta) * (2.0 * w0 + dm + delta)
    return 1j * wm * gm * np.exp(1j * config.mirror_phase) / (gap - 1j * wm * gm)


def _phases(delta, config: ValidatedConfig):
    """(e^{ikL/2}, e^{ikL}) at omega = omega0 + delta, exact in the carrier."""
    half = np.exp(1j * (config.half_phase + 0.5 * delta * config.tau))
    return half, half * half


def r_2dots(delta, config: ValidatedConfig, rwa=False):
    """Reflection of the bare two-mirror cavity,
    r1 (1 + e^{2ikL} + 2 r1 e^{2ikL}) / (1 - r1^2 e^{2ikL})."""
    delta = np.asarray(delta, dtype=complex)
    rr = _mirror_r1(delta, config, rwa)
    _, full = _phases(delta, config)
    e2 = full * full
    den = 1.0 - rr * rr * e2
    _check_singular(delta, den)
    out = rr * (1.0 + e2 + 2.0 * rr * e2) / den
    return out[()] if out.ndim == 0 else out


def gamma_tilde_p(delta, config: ValidatedConfig, rwa=False):
    """Retardation-modified probe decay rate (exact bracket), complex valued.

    gamma_p * [1 + e^{ikL} r1
               + (e^{ikL/2} + e^{ikL/2} e^{ikL} r1)
                 * r1 (e^{ikL/2} + r1 e^{ikL/2} e^{ikL}) / (1 - r1^2 e^{2ikL})]
    """
    delta = np.asarray(delta, dtype=complex)
    rr = _mirror_r1(delta, config, rwa)
    half, full = _phases(delta, config)
    den = 1.0 - rr * rr * full * full
    _check_singular(delta, den)
    bracket = 1.0 + full * rr + (half + half * full * rr) * rr * (half + rr * half * full) / den
    out = config.gamma_p * bracket
    return out[()] if out.ndim == 0 else out


def scattered_field_probe(delta, config: ValidatedConfig, rwa=False):
    """Normalized scattered field at the probe,
    i omega_p gamma~_p / (omega_p^2 - omega^2 - i omega gamma~_p)."""
    delta = np.asarray(delta, dtype=complex)
    gt = gamma_tilde_p(delta, config, rwa)
    w0 = config.omega0
    omega = w0 + delta
    gap = _gap(omega, w0, rwa)
    out = 1j * w0 * gt / (gap - 1j * omega * gt)
    return out[()] if out.ndim == 0 else out


def _check_singular(delta, den):
    """Raise SingularDenominator at the first grid point below threshold."""
    bad = np.abs(den) < SINGULAR_THRESHOLD
    if bad.ndim == 0:
        if bad:
            raise SingularDenominator(complex(delta), float(abs(den)))
    elif bad.any():
        i = int(np.argmax(bad))
        raise SingularDenominator(complex(np.asarray(delta).ravel()[i]),
                                  float(np.abs(den).ravel()[i]))


_KIND_FUNCS = {
    "r1": lambda d, cfg, rwa: _mirror_r1(np.asarray(d, dtype=complex), cfg, rwa),
    "r2dots": r_2dots,
    "gamma_tilde": gamma_tilde_p,
    "scattered_field": scattered_field_probe,
}


def scan(config: ValidatedConfig, kind: str, grid, rwa=False) -> ComplexSpectrum:
    """Evaluate one response on a real detuning grid.

    Singular points are reported as NaN values plus an entry in the error
    sidecar instead of aborting the whole scan.  Output ordering always
    follows the grid.
    """
    if kind not in _KIND_FUNCS:
        raise ValueError(f"kind must be one of {SPECTRUM_KINDS}, got {kind!r}")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty frequency grid")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("frequency grid must be strictly increasing")

    func = _KIND_FUNCS[kind]
    errors: list[tuple[int, str]] = []
    try:
        values = np.asarray(func(grid, config, rwa), dtype=complex)
    except SingularDenominator:
        # at least one singular point: fall back to pointwise evaluation
        values = np.empty(grid.shape, dtype=complex)
        for i, d in enumerate(grid):
            try:
                values[i] = func(d, config, rwa)
            except SingularDenominator as exc:
                values[i] = complex(np.nan, np.nan)
                errors.append((i, str(exc)))
    nonfinite = ~np.isfinite(values)
    flagged = {i for i, _ in errors}
    for i in np.nonzero(nonfinite)[0]:
        if int(i) not in flagged:
            errors.append((int(i), "non-finite response value"))
    errors.sort()
    return ComplexSpectrum(grid=grid, values=values, kind=kind, errors=errors)


# --- peak extraction ---------------------------------------------------------

def peak_positions(grid, magnitudes, min_height=0.0):
    """Local maxima of a sampled magnitude with three-point parabolic refinement.

    Returns a list of (position, height) sorted by position.  NaN samples
    never produce peaks.  The grid need not be uniform.
    """
    return _parabolic_extrema(grid, magnitudes, min_height, minima=False)


def dip_positions(grid, magnitudes, max_height=np.inf):
    """Local minima of a sampled magnitude, refined like peak_positions."""
    return _parabolic_extrema(grid, magnitudes, max_height, minima=True)


def _parabolic_extrema(grid, magnitudes, height, minima):
    x = np.asarray(grid, dtype=float)
    y = np.asarray(magnitudes, dtype=float)
    if minima:
        y = -y
        height = -height
    peaks = []
    for i in range(1, len(x) - 1):
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        if not (np.isfinite(y0) and np.isfinite(y1) and np.isfinite(y2)):
            continue
        if not (y1 > y0 and y1 >= y2 and y1 >= height):
            continue
        # fit y = a (x-x1)^2 + b (x-x1) + y1 through the three samples
        h0, h2 = x[i - 1] - x[i], x[i + 1] - x[i]
        denom = h0 * h2 * (h0 - h2)
        a = (h2 * (y0 - y1) - h0 * (y2 - y1)) / denom
        b = (h0 * h0 * (y2 - y1) - h2 * h2 * (y0 - y1)) / denom
        if a < 0.0:
            dx = min(max(-b / (2.0 * a), h0), h2)
            peaks.append((x[i] + dx, y1 - b * b / (4.0 * a)))
        else:
            peaks.append((x[i], y1))
    if minima:
        peaks = [(p, -h) for p, h in peaks]
    return peaks


def first_cavity_resonance(config: ValidatedConfig, resolution=None) -> float:
    """Detuning of the first cavity resonance above the carrier, omega_c1.

    Extracted as the first transmission dip of the two-mirror reflectivity
    |r_2dots|.  The bare mode would sit at pi/tau; mirror dispersion pulls it
    down, which is what the reported sideband positions reflect.  The scan
    resolution defaults to g0/400 and the search window to just past pi/tau.
    """
    g0 = config.scales.g0
    if resolution is None:
        resolution = g0 / 400.0
    lo = 0.25 * min(g0, math.pi / config.tau)
    hi = 1.35 * math.pi / config.tau
    n = max(int((hi - lo) / resolution) + 2, 64)
    spec = scan(config, "r2dots", np.linspace(lo, hi, n))
    dips = dip_positions(spec.grid, np.abs(spec.values))
    if not dips:
        raise ValueError("no cavity resonance found below 1.35 pi/tau")
    return dips[0][0]
