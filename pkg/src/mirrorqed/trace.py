"""Time series of qubit populations and conservation diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PopulationTrace:
    """Populations <sigma+ sigma-> of the three qubits over time.

    norm_deficit is 1 - <psi|psi>; excitation_number is the total
    <N> = sum qubit populations + sum bin occupations (for the oracle
    integrators it is exact by construction).  max_bond_dim stays 0 for
    non-MPS producers.  meta carries engine parameters for manifests.
    """

    times: np.ndarray
    n_mirror1: np.ndarray
    n_probe: np.ndarray
    n_mirror2: np.ndarray
    norm_deficit: np.ndarray
    excitation_number: np.ndarray
    max_bond_dim: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def populations(self) -> np.ndarray:
        """(n, 3) array in spatial order mirror1, probe, mirror2."""
        return np.column_stack([self.n_mirror1, self.n_probe, self.n_mirror2])


def compare_traces(a: PopulationTrace, b: PopulationTrace) -> dict[str, float]:
    """Max/mean absolute deviation per observable on the common time range.

    Traces are compared on a's time grid; b is linearly interpolated onto it
    when the grids differ.
    """
    t_hi = min(a.times[-1], b.times[-1])
    sel = a.times <= t_hi + 1e-12
    out: dict[str, float] = {}
    for name in ("n_mirror1", "n_probe", "n_mirror2"):
        ya = getattr(a, name)[sel]
        yb = np.interp(a.times[sel], b.times, getattr(b, name))
        dev = np.abs(ya - yb)
        out[f"max_dev_{name}"] = float(dev.max())
        out[f"mean_dev_{name}"] = float(dev.mean())
    out["max_dev"] = max(out[f"max_dev_{n}"] for n in ("n_mirror1", "n_probe", "n_mirror2"))
    return out
