"""Discretization of the field into time bins tied to the delay."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..config import ValidatedConfig
from ..errors import MisalignedDelay, StepTooCoarse

MAX_DT_GAMMA_M = 0.05


@dataclass(frozen=True)
class TimeBinLattice:
    """Two counter-propagating streams of bins of width dt.

    l = tau/dt must be an even integer so the probe's half-delay tau/2 is
    bin aligned; fock_cutoff is the max photon number per bin.
    """

    dt: float
    l: int
    n_steps: int
    fock_cutoff: int

    @property
    def bin_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def tau(self) -> float:
        return self.l * self.dt

    def times(self):
        import numpy as np
        return self.dt * np.arange(self.n_steps + 1)


def aligned_timestep(tau: float, target_dt: float) -> float:
    """Largest dt <= target_dt with tau/dt an even integer."""
    if tau <= 0 or target_dt <= 0:
        raise ValueError("need tau > 0 and target_dt > 0")
    half_bins = math.ceil(tau / (2.0 * target_dt))
    return tau / (2 * half_bins)


def build_lattice(config: ValidatedConfig, dt: float, t_max: float,
                  fock_cutoff: int = 1) -> TimeBinLattice:
    """Validate the discretization and lay out the bin lattice.

    The engine refuses to rescale dt silently: the delayed phases only align
    with bin indices when tau/dt is an even integer (use aligned_timestep).
    """
    if dt <= 0 or t_max <= 0:
        raise ValueError("need dt > 0 and t_max > 0")
    if fock_cutoff < 1:
        raise ValueError("fock_cutoff must be >= 1")
    if config.tau <= 0:
        raise MisalignedDelay(
            "the time-bin engine needs tau > 0 (two delay loops); "
            "for the Markov limit use a small tau instead"
        )
    ratio = config.tau / dt
    l = round(ratio)
    if abs(ratio - l) > 1e-9 * max(1.0, ratio) or l % 2 != 0 or l < 2:
        raise MisalignedDelay(
            f"tau/dt = {ratio:.12g} must be an even integer >= 2 "
            f"(adjust dt, e.g. via aligned_timestep)"
        )
    if dt * config.gamma_m > MAX_DT_GAMMA_M * (1 + 1e-12):
        raise StepTooCoarse(
            f"dt * gamma_m = {dt * config.gamma_m:.4g} exceeds {MAX_DT_GAMMA_M}"
        )
    n_steps = math.ceil(t_max / dt - 1e-9)
    return TimeBinLattice(dt=dt, l=int(l), n_steps=n_steps, fock_cutoff=fock_cutoff)
