"""Per-step unitaries of the time-bin evolution.

Each step applies three commuting gates, one per qubit, each the exact
exponential of its step generator on (qubit, one L bin, one R bin):

  mirror1: sqrt(gamma1_L dt) e^{i phi}   * L bin at k-l    + sqrt(gamma1_R dt) * R bin at k
  probe:   sqrt(gamma2_L dt) e^{i phi/2} * L bin at k-l/2  + sqrt(gamma2_R dt) e^{i phi/2} * R bin at k-l/2
  mirror2: sqrt(gamma3_L dt)             * L bin at k      + sqrt(gamma3_R dt) e^{i phi}   * R bin at k-l

with phi = omega0 tau mod 2pi and the mirror detuning folded into the mirror
generators.  The couplings use the normalized bin modes ([b, b+] = 1), i.e.
noise increments with commutator dt.  The three gates touch pairwise
disjoint sites for l >= 2, so there is no Trotter error between them.

Gate matrices are ordered to match the chain layout the engine maintains:
U1 ~ (qubit, R bin, L bin), U2 ~ (R bin, qubit, L bin), U3 ~ (R bin, L bin, qubit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..config import ValidatedConfig

SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |e><g|
NUMBER_QUBIT = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


def destroy(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def _kron(ops) -> np.ndarray:
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def _exact_unitary(generator: np.ndarray) -> np.ndarray:
    """exp(-i G) for Hermitian G via eigendecomposition (exactly unitary)."""
    w, v = np.linalg.eigh(generator)
    return (v * np.exp(-1j * w)) @ v.conj().T


@dataclass(frozen=True)
class StepGates:
    """The three per-step unitaries plus their bin-index schedule."""

    u1: np.ndarray   # acts on (Q1, R_k,     L_{k-l})   in chain order
    u2: np.ndarray   # acts on (R_{k-l/2}, Q2, L_{k-l/2})
    u3: np.ndarray   # acts on (R_{k-l},   L_k, Q3)
    l: int
    bin_dim: int

    def targets(self, k: int):
        """Site ids each gate touches at step k, as (gate, ordered ids)."""
        l, h = self.l, self.l // 2
        return (
            ("u1", (("Q", 1), ("R", k), ("L", k - l))),
            ("u2", (("R", k - h), ("Q", 2), ("L", k - h))),
            ("u3", (("R", k - l), ("L", k), ("Q", 3))),
        )


def _coupling_generator(site_ops, terms, extra=None) -> np.ndarray:
    """Hermitian generator sum_j (c_j * sp (x) b_j + h.c.) + extra diagonal.

    site_ops: list of identity matrices defining the local order; terms:
    (site_index_of_qubit, site_index_of_bin, amplitude) triples.
    """
    dims = [op.shape[0] for op in site_ops]
    total = math.prod(dims)
    g = np.zeros((total, total), dtype=complex)
    for qi, bi, amp in terms:
        ops = [np.eye(d, dtype=complex) for d in dims]
        ops[qi] = SIGMA_PLUS
        ops[bi] = destroy(dims[bi])
        term = amp * _kron(ops)
        g += term + term.conj().T
    if extra is not None:
        g += extra
    return g


def step_unitaries(lattice, config: ValidatedConfig, k: int = 0) -> StepGates:
    """Build the three exact step unitaries (independent of k).

    The returned object also carries the bin-index schedule ``targets(k)``;
    bins with negative indices are vacuum inputs that had not interacted yet.
    """
    dt = lattice.dt
    d = lattice.bin_dim
    phi = config.omega0_tau_phase
    half = 0.5 * phi
    m1, p2, m3 = config.qubits()
    eye_q = np.eye(2, dtype=complex)
    eye_b = np.eye(d, dtype=complex)

    def dm_term(order, qi):
        if config.mirror_detuning == 0.0:
            return None
        ops = [np.eye(o.shape[0], dtype=complex) for o in order]
        ops[qi] = NUMBER_QUBIT
        return config.mirror_detuning * dt * _kron(ops)

    # U1 on (qubit, R bin, L bin)
    order = [eye_q, eye_b, eye_b]
    g1 = _coupling_generator(
        order,
        [(0, 1, math.sqrt(m1.gamma_r * dt)),
         (0, 2, math.sqrt(m1.gamma_l * dt) * np.exp(1j * phi))],
        extra=dm_term(order, 0),
    )
    # U2 on (R bin, qubit, L bin)
    order = [eye_b, eye_q, eye_b]
    g2 = _coupling_generator(
        order,
        [(1, 0, math.sqrt(p2.gamma_r * dt) * np.exp(1j * half)),
         (1, 2, math.sqrt(p2.gamma_l * dt) * np.exp(1j * half))],
    )
    # U3 on (R bin, L bin, qubit)
    order = [eye_b, eye_b, eye_q]
    g3 = _coupling_generator(
        order,
        [(2, 1, math.sqrt(m3.gamma_l * dt)),
         (2, 0, math.sqrt(m3.gamma_r * dt) * np.exp(1j * phi))],
        extra=dm_term(order, 2),
    )
    return StepGates(u1=_exact_unitary(g1), u2=_exact_unitary(g2),
                     u3=_exact_unitary(g3), l=lattice.l, bin_dim=d)
