"""Time-bin matrix-product-state engine."""

from .engine import (
    ChiralComparison,
    MPSState,
    apply_step,
    chiral_compare,
    initial_state,
    measure_excitation_number,
    probe_chirality_config,
    run,
)
from .gates import StepGates, step_unitaries
from .lattice import TimeBinLattice, aligned_timestep, build_lattice
from .tensors import MPS, TruncationPolicy

__all__ = [
    "ChiralComparison",
    "MPS",
    "MPSState",
    "StepGates",
    "TimeBinLattice",
    "TruncationPolicy",
    "aligned_timestep",
    "apply_step",
    "build_lattice",
    "chiral_compare",
    "initial_state",
    "measure_excitation_number",
    "probe_chirality_config",
    "run",
    "step_unitaries",
]
