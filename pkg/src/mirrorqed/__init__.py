"""Cavity QED synthesized from three qubits on a 1D waveguide.

Two engines over one shared configuration:

* classical: exact Green-function spectra (reflection, modified probe decay,
  scattered field) and complex polariton pole tracking with argument-principle
  certification;
* quantum: time-bin matrix-product-state evolution with the two delay loops,
  chiral couplings and up to two excitations, cross-checked by a delay-ODE
  integrator and a dense state-vector oracle.
"""

from .config import (
    DerivedScales,
    QubitSpec,
    SystemConfig,
    ValidatedConfig,
    build_config,
    cavity_mode_frequency,
    read_config_file,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "DerivedScales",
    "QubitSpec",
    "SystemConfig",
    "ValidatedConfig",
    "build_config",
    "cavity_mode_frequency",
    "read_config_file",
    "validate",
    "__version__",
]
