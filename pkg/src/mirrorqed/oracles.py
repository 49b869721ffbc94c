"""Independent correctness anchors for the quantum engine.

delay_ode_run: the single-excitation amplitudes obey a closed system of
delay ODEs (the standard one-excitation reduction of the qubit-waveguide
Hamiltonian).  With c1, c2, c3 the mirror1/probe/mirror2 amplitudes in the
rotating frame, phi = omega0 tau mod 2pi, Theta the light-cone step,

  c1' = -(g1/2 + i Dm) c1 - sqrt(g1L g2L) e^{i phi/2} c2(t-tau/2) T
                          - sqrt(g1L g3L) e^{i phi}   c3(t-tau)   T
  c2' = -(g2/2) c2        - sqrt(g2R g1R) e^{i phi/2} c1(t-tau/2) T
                          - sqrt(g2L g3L) e^{i phi/2} c3(t-tau/2) T
  c3' = -(g3/2 + i Dm) c3 - sqrt(g3R g1R) e^{i phi}   c1(t-tau)   T
                          - sqrt(g3R g2R) e^{i phi/2} c2(t-tau/2) T

integrated by the method of steps: classical RK4 on a grid aligned to tau/2
so derivative discontinuities sit on nodes, with cubic Hermite history
interpolation (node values + stored one-sided derivatives), O(h^4).

dense_run: the exact same per-step unitaries as the MPS engine applied to a
full state vector restricted to the <= N excitation sector of the time-bin
lattice, with no truncation.  Small lattices only; this is the brute-force
reference for two-excitation runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ValidatedConfig
from .errors import DimensionTooLarge, StepTooCoarse
from .mps.gates import step_unitaries
from .mps.lattice import TimeBinLattice
from .trace import PopulationTrace

EXCITATION_INDEX = {"mirror1": 0, "probe": 1, "mirror2": 2}


# --- delay ODE oracle ---------------------------------------------------------

@dataclass
class _DdeSystem:
    decay: tuple          # per-qubit -(gamma/2 + i Delta)
    half_terms: tuple     # (target, source, amplitude) with tau/2 delay
    full_terms: tuple     # (target, source, amplitude) with tau delay


def _dde_system(config: ValidatedConfig) -> _DdeSystem:
    m1, p2, m3 = config.qubits()
    phi = config.omega0_tau_phase
    eh = np.exp(0.5j * phi)
    ef = np.exp(1.0j * phi)
    decay = (
        -(0.5 * m1.gamma + 1j * config.mirror_detuning),
        -0.5 * p2.gamma,
        -(0.5 * m3.gamma + 1j * config.mirror_detuning),
    )
    half_terms = (
        (0, 1, math.sqrt(m1.gamma_l * p2.gamma_l) * eh),
        (1, 0, math.sqrt(p2.gamma_r * m1.gamma_r) * eh),
        (1, 2, math.sqrt(p2.gamma_l * m3.gamma_l) * eh),
        (2, 1, math.sqrt(m3.gamma_r * p2.gamma_r) * eh),
    )
    full_terms = (
        (0, 2, math.sqrt(m1.gamma_l * m3.gamma_l) * ef),
        (2, 0, math.sqrt(m3.gamma_r * m1.gamma_r) * ef),
    )
    return _DdeSystem(decay, half_terms, full_terms)


def delay_ode_amplitudes(config: ValidatedConfig, dt_ode: float, t_max: float,
                         excitations=frozenset({"probe"})):
    """Integrate the delay ODEs; returns (times, amplitudes (n+1, 3)).

    The step is shrunk so tau/2 is an exact multiple of it (method of steps);
    all delayed lookups are node- or midpoint-exact, Theta handled in integer
    node arithmetic so no float comparisons sit on the light cone.
    """
    if config.tau <= 0:
        raise ValueError("delay oracle needs tau > 0")
    names = set(excitations)
    if len(names) != 1 or not names <= set(EXCITATION_INDEX):
        raise ValueError("single-excitation oracle: excitations must be one qubit name")
    if dt_ode <= 0 or t_max <= 0:
        raise ValueError("need dt_ode > 0 and t_max > 0")

    sys_ = _dde_system(config)
    half = 0.5 * config.tau
    m_half = max(1, math.ceil(half / dt_ode - 1e-12))
    h = half / m_half
    n = math.ceil(t_max / h - 1e-9)
    d_half, d_full = m_half, 2 * m_half

    ys = np.zeros((n + 1, 3), dtype=complex)
    f_in = np.zeros((n + 1, 3), dtype=complex)    # right-limit derivative at node
    f_out = np.zeros((n + 1, 3), dtype=complex)   # left-limit derivative at node
    y0 = np.zeros(3, dtype=complex)
    y0[EXCITATION_INDEX[next(iter(names))]] = 1.0
    ys[0] = y0

    def delayed(node2: int, strict: bool) -> np.ndarray:
        """History value at time node2 * h/2 (half-node units)."""
        if node2 < 0 or (node2 == 0 and strict):
            return np.zeros(3, dtype=complex)
        p, rem = divmod(node2, 2)
        if rem == 0:
            return ys[p]
        # cubic Hermite midpoint of interval [p, p+1]
        return 0.5 * (ys[p] + ys[p + 1]) + (h / 8.0) * (f_in[p] - f_out[p + 1])

    def rhs(node2: int, y: np.ndarray, strict: bool) -> np.ndarray:
        out = np.array([sys_.decay[0] * y[0], sys_.decay[1] * y[1], sys_.decay[2] * y[2]])
        zh = delayed(node2 - 2 * d_half, strict)
        zf = delayed(node2 - 2 * d_full, strict)
        for tgt, src, amp in sys_.half_terms:
            out[tgt] -= amp * zh[src]
        for tgt, src, amp in sys_.full_terms:
            out[tgt] -= amp * zf[src]
        return out

    f_in[0] = rhs(0, y0, strict=False)
    for j in range(n):
        node2 = 2 * j
        y = ys[j]
        k1 = f_in[j]
        k2 = rhs(node2 + 1, y + 0.5 * h * k1, strict=False)
        k3 = rhs(node2 + 1, y + 0.5 * h * k2, strict=False)
        k4 = rhs(node2 + 2, y + h * k3, strict=True)   # within-interval limit
        ys[j + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        f_out[j + 1] = rhs(node2 + 2, ys[j + 1], strict=True)
        f_in[j + 1] = rhs(node2 + 2, ys[j + 1], strict=False)

    return h * np.arange(n + 1), ys


def delay_ode_run(config: ValidatedConfig, dt_ode: float, t_max: float,
                  excitations=frozenset({"probe"}), check: bool = True) -> PopulationTrace:
    """Populations |c_n|^2 from the delay-ODE oracle.

    With check=True the run is repeated at half step; if any population
    changes by more than 1e-6 the step is too coarse (StepTooCoarse).
    """
    times, ys = delay_ode_amplitudes(config, dt_ode, t_max, excitations)
    pops = np.abs(ys) ** 2
    if check:
        t2, ys2 = delay_ode_amplitudes(config, 0.5 * dt_ode, t_max, excitations)
        p2 = np.abs(ys2) ** 2
        coarse = np.abs(pops - p2[::2][: len(pops)]).max() if len(t2) >= 2 * len(times) - 1 \
            else np.abs(pops[:-1] - p2[::2][: len(pops) - 1]).max()
        if coarse > 1e-6:
            raise StepTooCoarse(
                f"halving dt_ode changes populations by {coarse:.2e} > 1e-6"
            )
    n = len(times)
    meta = {"dt_ode": float(times[1] - times[0]) if n > 1 else dt_ode,
            "engine": "delay_ode", "convergence_checked": bool(check)}
    return PopulationTrace(
        times=times,
        n_mirror1=pops[:, 0], n_probe=pops[:, 1], n_mirror2=pops[:, 2],
        norm_deficit=np.zeros(n), excitation_number=np.ones(n),
        max_bond_dim=np.zeros(n, dtype=int), meta=meta,
    )


# --- dense state-vector oracle --------------------------------------------------

class _SectorSpace:
    """Occupation basis of the <= n_exc excitation sector over named modes."""

    def __init__(self, modes: list, caps: list[int], n_exc: int, max_dim: int):
        self.modes = modes
        self.index_of = {m: i for i, m in enumerate(modes)}
        nm = len(modes)
        states: list[tuple] = [()]
        if n_exc >= 1:
            states += [(i,) for i in range(nm)]
        if n_exc >= 2:
            states += [(i, j) for i in range(nm) for j in range(i, nm)
                       if (i != j or caps[i] >= 2)]
        if n_exc > 2:
            raise DimensionTooLarge("dense oracle supports at most two excitations")
        if len(states) > max_dim:
            raise DimensionTooLarge(
                f"sector dimension {len(states)} exceeds the {max_dim} guard"
            )
        self.states = states
        self.state_index = {s: i for i, s in enumerate(states)}
        self.occ = np.zeros((len(states), nm), dtype=np.int8)
        for i, s in enumerate(states):
            for m in s:
                self.occ[i, m] += 1

    def basis_state(self, occupied_modes) -> int:
        key = tuple(sorted(self.index_of[m] for m in occupied_modes))
        return self.state_index[key]


def _apply_gate(space: _SectorSpace, amp: np.ndarray, gate: np.ndarray,
                mode_cols: tuple[int, int, int], dims: tuple[int, int, int]) -> np.ndarray:
    """Apply a 3-mode unitary on the sector vector, grouped by spectator config."""
    occ = space.occ
    cols = list(mode_cols)
    loc = (occ[:, cols[0]].astype(np.int64) * dims[1] + occ[:, cols[1]]) * dims[2] \
        + occ[:, cols[2]]
    rest = occ.copy()
    rest[:, cols] = 0
    rest = np.ascontiguousarray(rest)
    keys = rest.view(np.dtype((np.void, rest.shape[1] * rest.dtype.itemsize))).ravel()
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    boundaries = np.nonzero(sorted_keys[1:] != sorted_keys[:-1])[0] + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(order)]])

    out = np.zeros_like(amp)
    for s, e in zip(starts, ends):
        idx = order[s:e]
        sub = gate[np.ix_(loc[idx], loc[idx])]
        out[idx] = sub @ amp[idx]
    return out


def dense_run(config: ValidatedConfig, lattice: TimeBinLattice,
              excitations=frozenset({"probe"}), max_dim: int = 30000) -> PopulationTrace:
    """Untruncated sector-exact evolution with the engine's own unitaries.

    Every bin that ever interacts gets a mode: ('L'|'R', j) for
    j in [-l, n_steps).  Memory and time grow quadratically in mode count,
    so this is for small lattices (the DimensionTooLarge guard is on the
    sector dimension).
    """
    names = set(excitations)
    if not names or not names <= set(EXCITATION_INDEX):
        raise ValueError("excitations must be a nonempty subset of the qubit names")
    if lattice.fock_cutoff < len(names):
        raise ValueError("fock_cutoff must be >= the excitation count")

    l, h = lattice.l, lattice.l // 2
    n = lattice.n_steps
    d = lattice.bin_dim
    cap = lattice.fock_cutoff
    modes: list = [("Q", 1), ("Q", 2), ("Q", 3)]
    caps = [1, 1, 1]
    for j in range(-l, n):
        for stream in ("L", "R"):
            modes.append((stream, j))
            caps.append(cap)
    space = _SectorSpace(modes, caps, len(names), max_dim)

    amp = np.zeros(len(space.states), dtype=complex)
    qubit_modes = {"mirror1": ("Q", 1), "probe": ("Q", 2), "mirror2": ("Q", 3)}
    amp[space.basis_state([qubit_modes[x] for x in names])] = 1.0

    gates = step_unitaries(lattice, config)
    mi = space.index_of
    q1, q2, q3 = mi[("Q", 1)], mi[("Q", 2)], mi[("Q", 3)]

    # single-mode number expectations via occupancy columns
    def pops(vec):
        w = np.abs(vec) ** 2
        return (float(w @ (space.occ[:, q1] > 0)),
                float(w @ (space.occ[:, q2] > 0)),
                float(w @ (space.occ[:, q3] > 0)))

    cols_n1 = np.empty(n + 1)
    cols_n2 = np.empty(n + 1)
    cols_n3 = np.empty(n + 1)
    norm_def = np.empty(n + 1)
    exc_num = np.empty(n + 1)
    cols_n1[0], cols_n2[0], cols_n3[0] = pops(amp)
    norm_def[0] = 1.0 - float(np.vdot(amp, amp).real)
    exc_num[0] = float((np.abs(amp) ** 2) @ space.occ.sum(axis=1))

    for k in range(n):
        amp = _apply_gate(space, amp, gates.u1,
                          (q1, mi[("R", k)], mi[("L", k - l)]), (2, d, d))
        amp = _apply_gate(space, amp, gates.u2,
                          (mi[("R", k - h)], q2, mi[("L", k - h)]), (d, 2, d))
        amp = _apply_gate(space, amp, gates.u3,
                          (mi[("R", k - l)], mi[("L", k)], q3), (d, d, 2))
        cols_n1[k + 1], cols_n2[k + 1], cols_n3[k + 1] = pops(amp)
        norm_def[k + 1] = 1.0 - float(np.vdot(amp, amp).real)
        exc_num[k + 1] = float((np.abs(amp) ** 2) @ space.occ.sum(axis=1))

    meta = {"dt": lattice.dt, "l": l, "fock_cutoff": cap,
            "sector_dim": len(space.states), "engine": "dense"}
    return PopulationTrace(
        times=lattice.times(),
        n_mirror1=cols_n1, n_probe=cols_n2, n_mirror2=cols_n3,
        norm_deficit=norm_def, excitation_number=exc_num,
        max_bond_dim=np.zeros(n + 1, dtype=int), meta=meta,
    )
