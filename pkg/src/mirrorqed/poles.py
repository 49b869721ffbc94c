"""Complex polariton poles of the retarded probe response.

The physical resonances are the zeros of D(omega) = omega_p^2 - omega^2
- i omega gamma~_p(omega), continued to complex omega through
e^{i omega tau}.  D itself is meromorphic: gamma~_p has poles at the bare
cavity resonances (zeros of 1 - r1^2 e^{2ikL}), so Newton steps and the
argument-principle count run on the pole-cleared entire function

    F = D * (q - p),   q = denominator of r1,   p = i omega_m gamma_m e^{i phi} e^{ikL},

which has exactly the zeros of D in the search regions (where q - p = 0, F
reduces to -2 i omega gamma_p q != 0).  Residuals are still reported on D,
whose local derivative sets the acceptance scale.

All frequencies are detunings from the carrier in units of gamma_p; the
Markov reference pair is omega_p - i gamma_p/4 +- g0.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .config import SystemConfig, ValidatedConfig, validate
from .errors import LostTrack, NonConvergence, OverflowGuard, WindingMismatch

NEWTON_STEP = 1e-6          # finite-difference step, units of gamma_p
NEWTON_MAX_ITERS = 80
DEDUP_DISTANCE = 1e-6       # units of gamma_p
RESIDUAL_FACTOR = 1e-10     # accept |D| <= factor * |D'| * gamma_p
MIN_BOUNDARY_SAMPLES = 4000
CONTINUATION_DEPTH = 50.0   # tau * |Im omega| guard for e^{i omega tau}


@dataclass(frozen=True)
class Pole:
    """One accepted complex resonance (detuning units, gamma_p)."""

    omega: complex
    residual_norm: float     # |D(omega)| at convergence
    seed: complex
    newton_iters: int


@dataclass
class PoleSet:
    """Poles found in one search, with the Markov reference and certification."""

    poles: list[Pole]
    markov_reference: tuple[complex, complex]
    winding_count: int | None
    failures: list[tuple[complex, str]]

    def main_pole(self) -> Pole:
        """The tracked pole with the largest positive real part."""
        if not self.poles:
            raise ValueError("empty pole set")
        return max(self.poles, key=lambda p: p.omega.real)


def markov_poles(gamma_m: float, gamma_p: float, omega_p: float = 0.0):
    """Closed-form non-retarded pair omega_p - i gamma_p/4 +- sqrt(2 gamma_p gamma_m)/2."""
    if gamma_p > 0 and gamma_m / gamma_p < 5.0:
        warnings.warn(
            "markov_poles assumes gamma_m >> gamma_p; "
            f"gamma_m/gamma_p = {gamma_m / gamma_p:.3g} is outside its accuracy range",
            stacklevel=2,
        )
    g0 = 0.5 * math.sqrt(2.0 * gamma_m * gamma_p)
    base = omega_p - 0.25j * gamma_p
    return base + g0, base - g0


def _guard(delta: complex, tau: float):
    if tau * abs(delta.imag) > CONTINUATION_DEPTH:
        raise OverflowGuard(
            f"tau * |Im omega| = {tau * abs(delta.imag):.3g} > {CONTINUATION_DEPTH:g}; "
            "analytic continuation of e^{i omega tau} would overflow"
        )


def _parts(delta: complex, config: ValidatedConfig):
    """(gap_p, q, p, omega) pieces shared by D and its cleared form."""
    w0 = config.omega0
    dm = config.mirror_detuning
    wm = w0 + dm
    omega = w0 + delta
    gap_p = (-delta) * (2.0 * w0 + delta)
    gap_m = (dm - delta) * (2.0 * w0 + dm + delta)
    q = gap_m - 1j * wm * config.gamma_m
    ekl = cmath.exp(1j * (config.omega0_tau_phase + delta * config.tau))
    p = 1j * wm * config.gamma_m * cmath.exp(1j * config.mirror_phase) * ekl
    return gap_p, q, p, omega


def pole_residual(delta: complex, config: ValidatedConfig) -> complex:
    """D(omega) = omega_p^2 - omega^2 - i omega gamma~_p(omega) at complex detuning."""
    delta = complex(delta)
    _guard(delta, config.tau)
    gap_p, q, p, omega = _parts(delta, config)
    return gap_p - 1j * omega * config.gamma_p * (q + p) / (q - p)


def cleared_residual(delta: complex, config: ValidatedConfig) -> complex:
    """Entire function F = D (q - p) whose zeros are the physical poles."""
    delta = complex(delta)
    _guard(delta, config.tau)
    gap_p, q, p, omega = _parts(delta, config)
    return gap_p * (q - p) - 1j * omega * config.gamma_p * (q + p)


def _newton(config: ValidatedConfig, seed: complex, deflate=()):
    """Newton with numerically differenced derivative on the cleared function.

    Already-found roots are deflated by dividing them out, so repeated seeds
    converge to new roots instead of piling onto old ones.
    """
    h = NEWTON_STEP * max(config.gamma_p, 1e-30)

    def f(z):
        val = cleared_residual(z, config)
        for r in deflate:
            d = z - r
            if abs(d) < 1e-300:
                return complex(np.inf)
            val /= d
        return val

    z = complex(seed)
    for it in range(1, NEWTON_MAX_ITERS + 1):
        fz = f(z)
        if not np.isfinite(fz.real) or not np.isfinite(fz.imag):
            raise NonConvergence(f"non-finite residual at {z}")
        dfz = (f(z + h) - f(z - h)) / (2.0 * h)
        if dfz == 0:
            raise NonConvergence(f"vanishing derivative at {z}")
        step = fz / dfz
        z -= step
        if abs(step) < 1e-13 * max(1.0, abs(z)):
            return z, it
    raise NonConvergence(f"no convergence from seed {seed} after {NEWTON_MAX_ITERS} iters")


def _residual_scale(delta: complex, config: ValidatedConfig) -> float:
    """|D'(omega)| * gamma_p via the same finite difference as the solver."""
    h = NEWTON_STEP * max(config.gamma_p, 1e-30)
    d1 = pole_residual(delta + h, config)
    d2 = pole_residual(delta - h, config)
    return abs((d1 - d2) / (2.0 * h)) * config.gamma_p


def default_seeds(config: ValidatedConfig, m_max: int = 3) -> list[complex]:
    """Markov pair plus cavity-mode guesses m pi/tau - i gamma_p/4."""
    seeds = list(markov_poles(config.gamma_m, config.gamma_p))
    if config.tau > 0:
        fsr = math.pi / config.tau
        for m in range(-m_max, m_max + 1):
            if m != 0:
                seeds.append(m * fsr - 0.25j * config.gamma_p)
    return seeds


def _in_rectangle(z: complex, rect) -> bool:
    re0, re1, im0, im1 = rect
    return re0 <= z.real <= re1 and im0 <= z.imag <= im1


def winding_number(config: ValidatedConfig, rect, n_samples: int = MIN_BOUNDARY_SAMPLES) -> int:
    """Argument-principle zero count of the cleared function over the rectangle.

    Phase increments are accumulated counterclockwise with local bisection
    wherever a single step turns by pi/2 or more, so sharp passages near the
    boundary do not alias the count.
    """
    re0, re1, im0, im1 = rect
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    per_edge = max(n_samples // 4, 16)
    points: list[complex] = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        ts = np.linspace(0.0, 1.0, per_edge, endpoint=False)
        points.extend(a + (b - a) * t for t in ts)
    points.append(points[0])

    def val(z):
        return cleared_residual(z, config)

    total = 0.0
    prev_z = points[0]
    prev_v = val(prev_z)
    for z in points[1:]:
        # refine this boundary segment until each phase step is < pi/2
        stack = [(prev_z, prev_v, z, val(z))]
        while stack:
            za, va, zb, vb = stack.pop()
            if va == 0 or vb == 0:
                raise WindingMismatch(-1, -1, rect)  # zero on the boundary
            dphi = cmath.phase(vb / va)
            if abs(dphi) < 0.5 * math.pi or abs(zb - za) < 1e-13 * (abs(za) + 1):
                total += dphi
            else:
                zm = 0.5 * (za + zb)
                vm = val(zm)
                stack.append((zm, vm, zb, vb))
                stack.append((za, va, zm, vm))
        prev_z, prev_v = z, val(z)
    count = total / (2.0 * math.pi)
    rounded = round(count)
    if abs(count - rounded) > 0.05:
        raise WindingMismatch(count, -1, rect)
    return int(rounded)


def find_poles(
    config: ValidatedConfig,
    rectangle,
    seeds=None,
    m_max: int = 3,
    strict: bool = True,
) -> PoleSet:
    """Locate all physical poles inside a lower-half-plane rectangle.

    Newton from every seed with deflation of found roots, de-duplication at
    1e-6 gamma_p (smaller residual wins), then winding-number certification
    over the rectangle boundary.  A count mismatch raises WindingMismatch
    when strict, otherwise it is recorded in the returned PoleSet.
    """
    re0, re1, im0, im1 = rectangle
    if not (re0 < re1 and im0 < im1):
        raise ValueError(f"degenerate rectangle {rectangle}")
    if im1 > 0:
        raise ValueError("rectangle must lie in the lower half plane (Im <= 0)")
    depth_cap = min(10.0 * config.gamma_p, CONTINUATION_DEPTH / config.tau) if config.tau > 0 \
        else 10.0 * config.gamma_p
    if -im0 > depth_cap:
        raise OverflowGuard(
            f"rectangle depth {-im0:g} exceeds cap {depth_cap:g} "
            "(analytic continuation unreliable below it)"
        )

    if seeds is None:
        seeds = default_seeds(config, m_max=m_max)

    markov_ref = markov_poles(config.gamma_m, config.gamma_p)
    roots: list[Pole] = []
    failures: list[tuple[complex, str]] = []
    for seed in seeds:
        try:
            z, iters = _newton(config, seed, deflate=[p.omega for p in roots])
        except (NonConvergence, OverflowGuard) as exc:
            failures.append((complex(seed), str(exc)))
            continue
        if not _in_rectangle(z, rectangle) or z.imag >= 0:
            continue
        res = abs(pole_residual(z, config))
        if res > RESIDUAL_FACTOR * _residual_scale(z, config):
            failures.append((complex(seed), f"residual {res:.3e} above acceptance bound"))
            continue
        cand = Pole(omega=z, residual_norm=res, seed=complex(seed), newton_iters=iters)
        for i, other in enumerate(roots):
            if abs(other.omega - z) < DEDUP_DISTANCE * config.gamma_p:
                if cand.residual_norm < other.residual_norm:
                    roots[i] = cand
                break
        else:
            roots.append(cand)

    winding = winding_number(config, rectangle)
    if winding != len(roots) and strict:
        raise WindingMismatch(winding, len(roots), rectangle)
    roots.sort(key=lambda p: p.omega.real)
    return PoleSet(poles=roots, markov_reference=markov_ref,
                   winding_count=winding, failures=failures)


# --- trajectories over delay -------------------------------------------------

def with_tau(config: ValidatedConfig, tau: float) -> ValidatedConfig:
    """Same physical rates and phase, different delay."""
    raw = SystemConfig(
        mirror=replace(config.mirror),
        probe=replace(config.probe),
        tau=tau,
        omega0_tau_phase=config.omega0_tau_phase if tau > 0 else 0.0,
        omega0_over_gp=config.omega0_over_gp,
        mirror_detuning=config.mirror_detuning,
        mirror_phase=config.mirror_phase,
    )
    return validate(raw)


def _continue_pair(config: ValidatedConfig, guesses):
    """Newton-refine a pole pair at one tau; raises NonConvergence."""
    out = []
    for g in guesses:
        z, iters = _newton(config, g, deflate=[p.omega for p in out])
        res = abs(pole_residual(z, config))
        if res > RESIDUAL_FACTOR * _residual_scale(z, config):
            raise NonConvergence(f"refined root {z} fails the residual bound")
        out.append(Pole(omega=z, residual_norm=res, seed=complex(g), newton_iters=iters))
    return out


def pole_trajectory(config_base: ValidatedConfig, tau_grid) -> list[PoleSet]:
    """Track the main +-pole pair across an increasing tau grid.

    Each step seeds Newton from the previous step's poles; when a step fails
    the tau interval is bisected up to 6 times before declaring LostTrack.
    Winding certification is skipped along trajectories (the per-step
    rectangles would be ambiguous); use find_poles for certified sets.
    """
    taus = [float(t) for t in tau_grid]
    if any(t2 <= t1 for t1, t2 in zip(taus, taus[1:])):
        raise ValueError("tau_grid must be strictly increasing")
    if not taus:
        return []

    markov_ref = markov_poles(config_base.gamma_m, config_base.gamma_p)
    guesses = list(markov_ref)
    results: list[PoleSet] = []
    prev_tau = None
    for tau in taus:
        try:
            poles = _track_step(config_base, prev_tau, tau, guesses)
        except NonConvergence as exc:
            raise LostTrack(prev_tau if prev_tau is not None else math.nan, str(exc))
        results.append(PoleSet(poles=poles, markov_reference=markov_ref,
                               winding_count=None, failures=[]))
        guesses = [p.omega for p in poles]
        prev_tau = tau
    return results


def _track_step(config_base, tau_from, tau_to, guesses, max_bisect: int = 6):
    """One continuation step with tau-interval bisection on failure."""
    try:
        return _continue_pair(with_tau(config_base, tau_to), guesses)
    except NonConvergence:
        if max_bisect == 0 or tau_from is None:
            raise
    mid = 0.5 * (tau_from + tau_to)
    mid_poles = _track_step(config_base, tau_from, mid, guesses, max_bisect - 1)
    return _track_step(config_base, mid, tau_to, [p.omega for p in mid_poles], max_bisect - 1)
