"""Time-bin MPS evolution of the three qubits with two delay loops.

Chain layout at the start of step k (left to right):

  [retired L bins] Q1 [AL: L_{k-l} .. L_{k-l/2-1}]
                      [AR: R_{k-1} .. R_{k-l/2}]      (newest left)
                   Q2 [BL: L_{k-l/2} .. L_{k-1}]      (oldest left)
                      [BR: R_{k-l/2-1} .. R_{k-l}]
                   Q3 [retired R bins]

Bins travel through the segments like conveyor belts: each step the qubits
interact with the bins adjacent to them, two fresh vacuum bins enter next to
the outer qubits, two exhausted bins retire past them, and the two bins
exchanged at the probe cross over.  Everything moves by nearest-neighbor
swaps, so the per-step cost is O(l) local operations regardless of run
length, and far-field vacuum bins move for free (see tensors.MPS.swap).

The three gates act on pairwise disjoint (qubit, L bin, R bin) triples, so
their order within a step is irrelevant; the schedule applies U3, U2, U1
along a right-to-left sweep and returns along a left-to-right sweep.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..config import ValidatedConfig, validate, SystemConfig
from ..errors import InvariantBreach
from ..trace import PopulationTrace
from .gates import NUMBER_QUBIT, StepGates, number_op, step_unitaries
from .lattice import TimeBinLattice, build_lattice, aligned_timestep
from .tensors import MPS, TruncationPolicy

QUBIT_IDS = (("Q", 1), ("Q", 2), ("Q", 3))
EXCITATION_NAMES = {"mirror1": 1, "probe": 2, "mirror2": 3}


@dataclass
class MPSState:
    """Evolving MPS plus step counter and retirement accumulators."""

    mps: MPS
    lattice: TimeBinLattice
    k: int = 0
    trash_excitation: float = 0.0   # sum of <n> of retired bins (frozen at retirement)
    n_excitations: int = 0
    _gates: StepGates | None = None
    _config_key: tuple | None = None

    def qubit_positions(self):
        return tuple(self.mps.pos(q) for q in QUBIT_IDS)


def initial_state(lattice: TimeBinLattice, excitations, policy: TruncationPolicy | None = None) -> MPSState:
    """Product state: named qubits excited, all bins in vacuum.

    excitations is a set drawn from {"mirror1", "probe", "mirror2"}.
    """
    names = set(excitations)
    if not names:
        raise ValueError("excitations must name at least one qubit")
    unknown = names - set(EXCITATION_NAMES)
    if unknown:
        raise ValueError(f"unknown excitation sites {sorted(unknown)}")
    if lattice.fock_cutoff < len(names):
        raise ValueError(
            f"fock_cutoff {lattice.fock_cutoff} < initial excitation count {len(names)}"
        )

    l, h = lattice.l, lattice.l // 2
    d = lattice.bin_dim
    ground = np.array([1.0, 0.0])
    excited = np.array([0.0, 1.0])
    vac = np.zeros(d)
    vac[0] = 1.0

    ids: list = []
    vecs: list = []
    flags: list = []

    def qubit(n, name):
        ids.append(("Q", n))
        vecs.append(excited if name in names else ground)
        flags.append(False)

    def bins(stream, js):
        for j in js:
            ids.append((stream, j))
            vecs.append(vac)
            flags.append(True)

    qubit(1, "mirror1")
    bins("L", range(-l, -h))                 # AL: L_{-l} .. L_{-h-1}
    bins("R", range(-1, -h - 1, -1))         # AR: R_{-1} .. R_{-h}
    qubit(2, "probe")
    bins("L", range(-h, 0))                  # BL: L_{-h} .. L_{-1}
    bins("R", range(-h - 1, -l - 1, -1))     # BR: R_{-h-1} .. R_{-l}
    qubit(3, "mirror2")

    mps = MPS.product_state(vecs, ids, policy=policy, vacuum_flags=flags)
    mps.move_center(len(mps) - 1)            # start the sweep cycle at Q3
    return MPSState(mps=mps, lattice=lattice, n_excitations=len(names))


def _gates_for(state: MPSState, config: ValidatedConfig) -> StepGates:
    key = (config.omega0_tau_phase, config.mirror_detuning,
           config.mirror.gamma_l, config.mirror.gamma_r,
           config.probe.gamma_l, config.probe.gamma_r,
           state.lattice.dt, state.lattice.fock_cutoff)
    if state._gates is None or state._config_key != key:
        state._gates = step_unitaries(state.lattice, config)
        state._config_key = key
    return state._gates


def apply_step(state: MPSState, lattice: TimeBinLattice, config: ValidatedConfig,
               k: int | None = None) -> dict[str, float]:
    """Advance one step; returns the populations measured along the sweep.

    The orthogonality center starts and ends on Q3.
    """
    if k is None:
        k = state.k
    if k != state.k:
        raise ValueError(f"schedule expects step {state.k}, got {k}")
    mps = state.mps
    gates = _gates_for(state, config)
    l, h = lattice.l, lattice.l // 2
    d = lattice.bin_dim
    n_op = number_op(d)
    mps.step_discarded = 0.0

    # structural disjointness of the three gate targets
    touched: set = set()
    for _, ids in gates.targets(k):
        for sid in ids:
            if sid in touched:
                raise InvariantBreach(k, "gate_disjointness", f"site {sid} reused")
            touched.add(sid)

    out: dict[str, float] = {}

    # --- right side: U3 on (R_{k-l}, L_k, Q3), retire R_{k-l} ---------------
    p3 = mps.pos(("Q", 3))
    assert mps.ids[p3 - 1] == ("R", k - l)
    mps.insert_vacuum_site(p3, ("L", k), d)          # [.., R_old, L_k, Q3, ..]
    p3 = mps.pos(("Q", 3))
    mps.move_center(p3)
    mps.apply_three_site(p3 - 2, gates.u3, center_to="right")
    out["n_mirror2"] = mps.expect_center(NUMBER_QUBIT).real

    r_old = ("R", k - l)
    mps.move_center(mps.pos(r_old) + 1)
    mps.swap(mps.pos(r_old), keep="right")           # [.., L_k, R_old, Q3, ..]
    state.trash_excitation += mps.expect_site(mps.pos(r_old), n_op).real
    mps.swap(mps.pos(r_old), keep="left")            # [.., L_k, Q3, R_old(trash)]

    # L_k crosses BR to sit right of BL
    mps.move_site(("L", k), mps.pos(("Q", 3)) - 1 - (h - 1), keep="left")

    # --- middle: U2 on (R_{k-h}, Q2, L_{k-h}), cross-exchange ----------------
    p2 = mps.pos(("Q", 2))
    assert mps.ids[p2 - 1] == ("R", k - h) and mps.ids[p2 + 1] == ("L", k - h)
    mps.move_center(p2)
    mps.apply_three_site(p2 - 1, gates.u2, center_to="middle")
    out["n_probe"] = mps.expect_center(NUMBER_QUBIT).real

    p2 = mps.pos(("Q", 2))
    mps.swap(p2, keep="left")                        # [R_h, L_h, Q2]
    mps.swap(p2 - 1, keep="left")                    # [L_h, R_h, Q2]
    mps.swap(p2, keep="left")                        # [L_h, Q2, R_h]

    # L_{k-h} crosses AR to sit right of AL
    mps.move_site(("L", k - h), mps.pos(("Q", 2)) - 1 - (h - 1), keep="left")

    # --- left side: U1 on (Q1, R_k, L_{k-l}), retire L_{k-l} -----------------
    p1 = mps.pos(("Q", 1))
    assert mps.ids[p1 + 1] == ("L", k - l)
    mps.insert_vacuum_site(p1 + 1, ("R", k), d)      # [Q1, R_k, L_old, ..]
    p1 = mps.pos(("Q", 1))
    mps.move_center(p1)
    mps.apply_three_site(p1, gates.u1, center_to="left")
    out["n_mirror1"] = mps.expect_center(NUMBER_QUBIT).real

    l_old = ("L", k - l)
    mps.move_center(mps.pos(l_old) - 1)
    mps.swap(mps.pos(l_old) - 1, keep="left")        # [Q1, L_old, R_k]
    state.trash_excitation += mps.expect_site(mps.pos(l_old), n_op).real
    mps.swap(mps.pos(l_old) - 1, keep="right")       # [L_old(trash), Q1, R_k]

    # --- return sweep: R_k across AL', R_{k-h} across BL' --------------------
    mps.move_site(("R", k), mps.pos(("Q", 1)) + 1 + h, keep="right")
    mps.move_site(("R", k - h), mps.pos(("Q", 2)) + 1 + h, keep="right")
    mps.move_center(mps.pos(("Q", 3)))

    mps.check_step_overflow(k)
    state.k = k + 1
    return out


def measure_excitation_number(state: MPSState) -> float:
    """Total <N>: qubits + active bins + frozen retired-bin contributions.

    Retired bins never interact again; their occupations are accumulated
    when they leave the active window, with bookkeeping error bounded by the
    truncation weight discarded afterwards.
    """
    mps = state.mps
    p1, p3 = mps.pos(("Q", 1)), mps.pos(("Q", 3))
    here = mps.center
    ops = {2: NUMBER_QUBIT}

    def op_for_dim(dim):
        if dim not in ops:
            ops[dim] = number_op(dim)
        return ops[dim]

    total = sum(v.real for v in mps.expectation_sweep(p1, p3 + 1, op_for_dim))
    mps.move_center(here)
    return total + state.trash_excitation


def _qubit_populations_product(state: MPSState) -> dict[str, float]:
    """Populations of the (product) initial state without moving the center."""
    out = {}
    for name, n in EXCITATION_NAMES.items():
        t = state.mps.tensors[state.mps.pos(("Q", n))]
        vec = t.reshape(-1)
        out[f"n_{name}"] = float((np.abs(vec[1]) ** 2) / max(np.vdot(vec, vec).real, 1e-300))
    return out


def run(config: ValidatedConfig, lattice: TimeBinLattice, initial: MPSState | set,
        policy: TruncationPolicy | None = None, checks: bool = True,
        number_stride: int = 10) -> PopulationTrace:
    """Full evolution with per-step observables and conservation checks.

    ``initial`` is either an MPSState or a set of excitation names.  The
    excitation number is measured every ``number_stride`` steps (a full
    sweep over the active window) and carried forward in between.
    """
    if isinstance(initial, MPSState):
        state = initial
    else:
        state = initial_state(lattice, initial, policy=policy)
    mps = state.mps
    n = lattice.n_steps
    cols = {name: np.empty(n + 1) for name in
            ("n_mirror1", "n_probe", "n_mirror2", "norm_deficit",
             "excitation_number", "max_bond_dim")}
    pops0 = _qubit_populations_product(state)
    n0 = float(state.n_excitations)
    cols["n_mirror1"][0], cols["n_probe"][0], cols["n_mirror2"][0] = (
        pops0["n_mirror1"], pops0["n_probe"], pops0["n_mirror2"])
    cols["norm_deficit"][0] = 1.0 - mps.norm2()
    cols["excitation_number"][0] = n0
    cols["max_bond_dim"][0] = 1

    probe_only = (cols["n_mirror1"][0] == 0.0 and cols["n_mirror2"][0] == 0.0
                  and cols["n_probe"][0] > 0.0)
    wall0 = time.perf_counter()
    for k in range(n):
        pops = apply_step(state, lattice, config, k)
        i = k + 1
        cols["n_mirror1"][i] = pops["n_mirror1"]
        cols["n_probe"][i] = pops["n_probe"]
        cols["n_mirror2"][i] = pops["n_mirror2"]
        deficit = 1.0 - mps.norm2()
        cols["norm_deficit"][i] = deficit
        cols["max_bond_dim"][i] = mps.max_bond_seen
        if i % number_stride == 0 or i == n:
            cols["excitation_number"][i] = measure_excitation_number(state)
        else:
            cols["excitation_number"][i] = cols["excitation_number"][i - 1]
        if checks:
            _check_invariants(state, lattice, config, i, cols, n0, probe_only)

    times = lattice.times()
    meta = {
        "dt": lattice.dt, "l": lattice.l, "fock_cutoff": lattice.fock_cutoff,
        "chi_max": mps.policy.chi_max, "svd_cutoff": mps.policy.svd_cutoff,
        "discarded_total": mps.discarded_total, "max_bond_dim": mps.max_bond_seen,
        "wall_time_s": time.perf_counter() - wall0,
        "number_stride": number_stride, "engine": "mps",
    }
    return PopulationTrace(
        times=times,
        n_mirror1=cols["n_mirror1"], n_probe=cols["n_probe"], n_mirror2=cols["n_mirror2"],
        norm_deficit=cols["norm_deficit"], excitation_number=cols["excitation_number"],
        max_bond_dim=cols["max_bond_dim"].astype(int), meta=meta,
    )


def _check_invariants(state, lattice, config, i, cols, n0, probe_only):
    mps = state.mps
    k = i - 1
    deficit = cols["norm_deficit"][i]
    if abs(deficit) > mps.discarded_total + 1e-9:
        raise InvariantBreach(k, "norm",
                              f"deficit {deficit:.3e} > discarded {mps.discarded_total:.3e} + 1e-9")
    drift = abs(cols["excitation_number"][i] - n0)
    if drift > 10.0 * mps.discarded_total + 1e-8:
        raise InvariantBreach(k, "excitation_number",
                              f"drift {drift:.3e} > 10 x discarded {mps.discarded_total:.3e}")
    for name in ("n_mirror1", "n_probe", "n_mirror2"):
        v = cols[name][i]
        if not (-1e-8 <= v <= 1.0 + 1e-8):
            raise InvariantBreach(k, "population_range", f"{name} = {v}")
    if probe_only:
        t = i * lattice.dt
        if t < 0.5 * lattice.tau - 1e-12:
            if cols["n_mirror1"][i] > 1e-10 or cols["n_mirror2"][i] > 1e-10:
                raise InvariantBreach(k, "causality",
                                      "mirror population before t = tau/2")


# --- convenience runners ------------------------------------------------------

def probe_chirality_config(config: ValidatedConfig, which: str) -> ValidatedConfig:
    """Same system with the probe coupling rotated to sym/L/R chirality."""
    gp = config.gamma_p
    if which == "sym":
        gl = gr = 0.5 * gp
    elif which == "L":
        gl, gr = gp, 0.0
    elif which == "R":
        gl, gr = 0.0, gp
    else:
        raise ValueError(f"chirality must be sym/L/R, got {which!r}")
    raw = SystemConfig(
        mirror=replace(config.mirror),
        probe=replace(config.probe, gamma_l=gl, gamma_r=gr),
        tau=config.tau,
        omega0_tau_phase=config.omega0_tau_phase,
        omega0_over_gp=config.omega0_over_gp,
        mirror_detuning=config.mirror_detuning,
        mirror_phase=config.mirror_phase,
    )
    return validate(raw)


@dataclass
class ChiralComparison:
    trace_left: PopulationTrace    # gamma_p^L = gamma_p, gamma_p^R = 0
    trace_right: PopulationTrace   # gamma_p^L = 0, gamma_p^R = gamma_p
    metrics: dict = field(default_factory=dict)


def chiral_compare(config: ValidatedConfig, lattice: TimeBinLattice,
                   excitations=frozenset({"probe", "mirror1"}),
                   policy: TruncationPolicy | None = None) -> ChiralComparison:
    """Run both probe chiralities and report probe-trace difference metrics."""
    traces = {}
    for which in ("L", "R"):
        cfg = probe_chirality_config(config, which)
        traces[which] = run(cfg, lattice, set(excitations), policy=policy)
    tl, tr = traces["L"], traces["R"]
    i_l, i_r = int(np.argmax(tl.n_probe[1:]) + 1), int(np.argmax(tr.n_probe[1:]) + 1)
    metrics = {
        "max_n_probe_L": float(tl.n_probe.max()),
        "max_n_probe_R": float(tr.n_probe.max()),
        "peak_time_L": float(tl.times[i_l]),
        "peak_time_R": float(tr.times[i_r]),
        "max_probe_trace_diff": float(np.max(np.abs(tl.n_probe - tr.n_probe))),
        "mirror_exchange_dev": float(max(
            np.max(np.abs(tl.n_mirror1 - tr.n_mirror2)),
            np.max(np.abs(tl.n_mirror2 - tr.n_mirror1)),
        )),
    }
    return ChiralComparison(trace_left=tl, trace_right=tr, metrics=metrics)
