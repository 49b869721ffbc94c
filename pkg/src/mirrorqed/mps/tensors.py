"""Minimal finite MPS with the operations the time-bin engine needs.

Site tensors have shape (left bond, physical, right bond).  The chain keeps
an orthogonality center: sites left of it are left-isometric, sites right of
it right-isometric, so two-site SVD truncation at the center is globally
optimal and the norm is the Frobenius norm of the center tensor.

Edge bonds need not be trivial: once a bin has had its last interaction it
is swapped past the outer qubit and dropped from the chain (drop_edge).  The
dropped tensor is an isometry, so every observable on the remaining sites,
and the global norm, are unchanged; the freed bond stays as a dangling edge
index.  This keeps the active chain at O(l) sites for arbitrarily long runs.

Vacuum bookkeeping: a site whose tensor is exactly ``delta_{n,0} (x) M`` (a
vacuum occupation riding on a bond passthrough M) is flagged.  Swapping such
a site past a neighbor needs no SVD - the neighbor absorbs M and the flagged
site is left as a pristine ``delta (x) identity`` - which keeps conveyor
traffic of not-yet-struck vacuum bins exact and cheap.  Flags are set
structurally (at creation) and propagated, never detected numerically.
"""

from __future__ import annotations

import numpy as np

from ..errors import TruncationOverflow

_qr = np.linalg.qr
_svd_np = np.linalg.svd


class TruncationPolicy:
    """SVD truncation control.

    svd_cutoff is the discarded-weight threshold per bond: the largest
    trailing set of squared singular values with total relative weight below
    it is dropped.  chi_max caps the bond dimension afterwards; overflow
    beyond ``overflow_limit`` discarded in one engine step is an error.
    """

    def __init__(self, svd_cutoff: float = 1e-10, chi_max: int = 64,
                 overflow_limit: float = 1e-6):
        if svd_cutoff < 0 or chi_max < 1:
            raise ValueError("need svd_cutoff >= 0 and chi_max >= 1")
        self.svd_cutoff = svd_cutoff
        self.chi_max = chi_max
        self.overflow_limit = overflow_limit

    def __repr__(self):
        return (f"TruncationPolicy(svd_cutoff={self.svd_cutoff:g}, "
                f"chi_max={self.chi_max}, overflow_limit={self.overflow_limit:g})")


def _vacuum_tensor(dim: int, mat: np.ndarray) -> np.ndarray:
    """delta_{n,0} (x) M."""
    t = np.zeros((mat.shape[0], dim, mat.shape[1]), dtype=complex)
    t[:, 0, :] = mat
    return t


def _svd(mat: np.ndarray):
    try:
        return _svd_np(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        # rare gesdd failure; gesvd via scipy is slower but robust
        import scipy.linalg
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


class MPS:
    """Finite MPS over labelled sites with center-gauge bookkeeping."""

    def __init__(self, tensors, ids, policy: TruncationPolicy | None = None,
                 center: int = 0, flags=None):
        self.tensors: list[np.ndarray] = [np.asarray(t, dtype=complex) for t in tensors]
        self.ids: list = list(ids)
        if len(self.ids) != len(self.tensors):
            raise ValueError("one id per tensor required")
        self.policy = policy or TruncationPolicy()
        self.center = center
        self.flags: list[bool] = list(flags) if flags is not None else [False] * len(self.tensors)
        self._pos = {sid: i for i, sid in enumerate(self.ids)}
        self.discarded_total = 0.0
        self.step_discarded = 0.0
        self.max_bond_seen = 1

    # -- construction ---------------------------------------------------------

    @classmethod
    def product_state(cls, vectors, ids, policy=None, vacuum_flags=None):
        """Bond-1 product state; vectors are the local kets."""
        tensors = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in vectors]
        return cls(tensors, ids, policy=policy, center=0, flags=vacuum_flags)

    # -- bookkeeping ----------------------------------------------------------

    def __len__(self):
        return len(self.tensors)

    def pos(self, sid) -> int:
        return self._pos[sid]

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def norm2(self) -> float:
        t = self.tensors[self.center]
        return float(np.vdot(t, t).real)

    def _swap_ids(self, i):
        a, b = self.ids[i], self.ids[i + 1]
        self.ids[i], self.ids[i + 1] = b, a
        self._pos[a], self._pos[b] = i + 1, i

    # -- center movement ------------------------------------------------------

    def move_center(self, target: int):
        tensors, flags = self.tensors, self.flags
        while self.center < target:
            c = self.center
            t = tensors[c]
            a, d, b = t.shape
            if flags[c]:
                q, r = _qr(t[:, 0, :])
                tensors[c] = _vacuum_tensor(d, q)
            else:
                q, r = _qr(t.reshape(a * d, b))
                tensors[c] = q.reshape(a, d, -1)
            nxt = tensors[c + 1]
            if flags[c + 1]:
                tensors[c + 1] = _vacuum_tensor(nxt.shape[1], r @ nxt[:, 0, :])
            else:
                bn = nxt.shape[0]
                tensors[c + 1] = (r @ nxt.reshape(bn, -1)).reshape(r.shape[0], nxt.shape[1], -1)
            self.center = c + 1
        while self.center > target:
            c = self.center
            t = tensors[c]
            a, d, b = t.shape
            if flags[c]:
                qh, rh = _qr(t[:, 0, :].conj().T)
                q, r = qh.conj().T, rh.conj().T      # t[:,0,:] = r @ q
                tensors[c] = _vacuum_tensor(d, q)
            else:
                qh, rh = _qr(t.reshape(a, d * b).conj().T)
                q, r = qh.conj().T, rh.conj().T
                tensors[c] = q.reshape(-1, d, b)
            prv = tensors[c - 1]
            if flags[c - 1]:
                tensors[c - 1] = _vacuum_tensor(prv.shape[1], prv[:, 0, :] @ r)
            else:
                ap = prv.shape[0]
                tensors[c - 1] = (prv.reshape(-1, prv.shape[2]) @ r).reshape(ap, prv.shape[1], -1)
            self.center = c - 1

    # -- truncated splits -----------------------------------------------------

    def _truncate(self, s: np.ndarray) -> int:
        w = s * s
        total = w.sum()
        if total == 0.0:
            return 1
        rev = np.cumsum(w[::-1])[::-1]  # rev[k] = sum of w[k:]
        keep = int(np.searchsorted(-rev, -self.policy.svd_cutoff * total))
        keep = max(1, min(keep, len(s), self.policy.chi_max))
        discarded = float(rev[keep] / total) if keep < len(s) else 0.0
        self.discarded_total += discarded
        self.step_discarded += discarded
        if keep > self.max_bond_seen:
            self.max_bond_seen = keep
        return keep

    def _split_pair(self, i, theta_mat, chi_l, da, db, chi_r, keep_side):
        """SVD-split theta reshaped as (chi_l*da, db*chi_r) between i, i+1."""
        u, s, vt = _svd(theta_mat)
        k = self._truncate(s)
        u, s, vt = u[:, :k], s[:k], vt[:k]
        if keep_side == "left":
            self.tensors[i] = (u * s).reshape(chi_l, da, k)
            self.tensors[i + 1] = vt.reshape(k, db, chi_r)
            self.center = i
        else:
            self.tensors[i] = u.reshape(chi_l, da, k)
            self.tensors[i + 1] = (s[:, None] * vt).reshape(k, db, chi_r)
            self.center = i + 1
        self.flags[i] = self.flags[i + 1] = False

    # -- swaps ----------------------------------------------------------------

    def swap(self, i: int, keep: str = "left"):
        """Exchange sites i and i+1.

        Fast exact paths when a vacuum-flagged site is involved; otherwise a
        center-gauged SVD swap with truncation.
        """
        fa, fb = self.flags[i], self.flags[i + 1]
        ta, tb = self.tensors[i], self.tensors[i + 1]
        if fa and fb and ta.shape[1] == tb.shape[1]:
            self._swap_ids(i)   # both in vacuum: relabel only
            return
        if fb and not fa:
            # content at i moves right absorbing the passthrough of i+1
            m = tb[:, 0, :]
            a, da, _ = ta.shape
            self.tensors[i + 1] = (ta.reshape(a * da, -1) @ m).reshape(a, da, -1)
            self.tensors[i] = _vacuum_tensor(tb.shape[1], np.eye(a, dtype=complex))
            self.flags[i], self.flags[i + 1] = True, False
            self._swap_ids(i)
            if self.center == i:
                self.center = i + 1
            return
        if fa and not fb:
            m = ta[:, 0, :]
            _, db, b = tb.shape
            self.tensors[i] = (m @ tb.reshape(m.shape[1], db * b)).reshape(-1, db, b)
            self.tensors[i + 1] = _vacuum_tensor(ta.shape[1], np.eye(b, dtype=complex))
            self.flags[i], self.flags[i + 1] = False, True
            self._swap_ids(i)
            if self.center == i + 1:
                self.center = i
            return
        # generic SVD swap
        if self.center < i:
            self.move_center(i)
        elif self.center > i + 1:
            self.move_center(i + 1)
        ta, tb = self.tensors[i], self.tensors[i + 1]
        a, da, m = ta.shape
        mb, db, b = tb.shape
        theta = (ta.reshape(a * da, m) @ tb.reshape(mb, db * b))
        theta = theta.reshape(a, da, db, b).transpose(0, 2, 1, 3)
        self._swap_ids(i)
        self._split_pair(i, theta.reshape(a * db, da * b), a, db, da, b, keep_side=keep)

    def move_site(self, sid, target_pos: int, keep: str | None = None):
        """Bubble one site to target_pos through adjacent swaps."""
        p = self.pos(sid)
        while p > target_pos:
            self.swap(p - 1, keep=keep or "left")
            p -= 1
        while p < target_pos:
            self.swap(p, keep=keep or "right")
            p += 1

    # -- gates ----------------------------------------------------------------

    def apply_two_site(self, i: int, gate: np.ndarray, keep: str = "left"):
        """Apply a (da*db, da*db) unitary on sites (i, i+1)."""
        if not (self.center == i or self.center == i + 1):
            self.move_center(i)
        ta, tb = self.tensors[i], self.tensors[i + 1]
        a, da, m = ta.shape
        mb, db, b = tb.shape
        theta = (ta.reshape(a * da, m) @ tb.reshape(mb, db * b)).reshape(a, da * db, b)
        theta = (gate @ theta.transpose(1, 0, 2).reshape(da * db, a * b)) \
            .reshape(da, db, a, b).transpose(2, 0, 1, 3)
        self._split_pair(i, theta.reshape(a * da, db * b), a, da, db, b, keep_side=keep)

    def apply_three_site(self, i: int, gate: np.ndarray, center_to: str = "left"):
        """Apply a (d1 d2 d3)^2 unitary on sites (i, i+1, i+2).

        center_to selects where the orthogonality center lands:
        'left' -> i, 'middle' -> i+1, 'right' -> i+2.
        """
        if not (i <= self.center <= i + 2):
            self.move_center(i + 1)
        t0, t1, t2 = self.tensors[i], self.tensors[i + 1], self.tensors[i + 2]
        d0, d1, d2 = t0.shape[1], t1.shape[1], t2.shape[1]
        a, b = t0.shape[0], t2.shape[2]
        theta = (t0.reshape(a * d0, -1) @ t1.reshape(t1.shape[0], -1)) \
            .reshape(a * d0 * d1, -1) @ t2.reshape(t2.shape[0], -1)
        theta = theta.reshape(a, d0 * d1 * d2, b)
        theta = (gate @ theta.transpose(1, 0, 2).reshape(d0 * d1 * d2, a * b)) \
            .reshape(d0 * d1 * d2, a, b).transpose(1, 0, 2)
        theta = theta.reshape(a, d0, d1, d2, b)

        if center_to == "left":
            u, s, vt = _svd(theta.reshape(a * d0 * d1, d2 * b))
            k = self._truncate(s)
            u, s, vt = u[:, :k], s[:k], vt[:k]
            self.tensors[i + 2] = vt.reshape(k, d2, b)
            self.flags[i + 2] = False
            rest = (u * s).reshape(a, d0, d1, k)
            self._split_pair(i, rest.reshape(a * d0, d1 * k), a, d0, d1, k, keep_side="left")
        else:
            u, s, vt = _svd(theta.reshape(a * d0, d1 * d2 * b))
            k = self._truncate(s)
            u, s, vt = u[:, :k], s[:k], vt[:k]
            self.tensors[i] = u.reshape(a, d0, k)
            self.flags[i] = False
            rest = (s[:, None] * vt).reshape(k, d1, d2, b)
            side = "left" if center_to == "middle" else "right"
            self._split_pair(i + 1, rest.reshape(k * d1, d2 * b), k, d1, d2, b, keep_side=side)

    # -- structure edits ------------------------------------------------------

    def insert_vacuum_site(self, pos: int, sid, dim: int):
        """Splice a pristine vacuum site at position pos (between pos-1 and pos)."""
        if sid in self._pos:
            raise ValueError(f"duplicate site id {sid!r}")
        chi = self.tensors[pos - 1].shape[2] if pos > 0 else self.tensors[0].shape[0]
        self.tensors.insert(pos, _vacuum_tensor(dim, np.eye(chi, dtype=complex)))
        self.ids.insert(pos, sid)
        self.flags.insert(pos, True)
        for s, p in self._pos.items():
            if p >= pos:
                self._pos[s] = p + 1
        self._pos[sid] = pos
        if pos <= self.center:
            self.center += 1

    def drop_edge(self, side: str):
        """Remove the first/last site from the chain.

        Valid only for sites strictly outside the center's gauge region: the
        dropped tensor must be an isometry toward the chain (left-isometric
        at the left edge, right-isometric at the right edge), which holds for
        any site the center has moved away from.  Observables on the
        remaining sites and the norm are unchanged; the freed bond index
        stays dangling at the edge.
        """
        if side == "left":
            if self.center == 0:
                raise ValueError("cannot drop the orthogonality center")
            sid = self.ids.pop(0)
            self.tensors.pop(0)
            self.flags.pop(0)
            del self._pos[sid]
            for s, p in self._pos.items():
                self._pos[s] = p - 1
            self.center -= 1
        elif side == "right":
            if self.center == len(self.tensors) - 1:
                raise ValueError("cannot drop the orthogonality center")
            sid = self.ids.pop()
            self.tensors.pop()
            self.flags.pop()
            del self._pos[sid]
        else:
            raise ValueError("side must be 'left' or 'right'")
        return sid

    # -- measurement ----------------------------------------------------------

    def expect_center(self, op: np.ndarray) -> complex:
        """<psi| op_at_center |psi> (unnormalized) with the rest isometric."""
        t = self.tensors[self.center]
        a, d, b = t.shape
        m = t.transpose(1, 0, 2).reshape(d, a * b)
        return complex(np.vdot(m, op @ m))

    def expect_site(self, pos: int, op: np.ndarray) -> complex:
        """Expectation at an arbitrary site; moves the center there."""
        self.move_center(pos)
        return self.expect_center(op)

    def expectation_sweep(self, lo: int, hi: int, op_for_dim) -> list[complex]:
        """<op> for every site in [lo, hi), moving the center once across.

        op_for_dim(d) must return the local operator for physical dimension d.
        """
        out = []
        for p in range(lo, hi):
            self.move_center(p)
            out.append(self.expect_center(op_for_dim(self.tensors[p].shape[1])))
        return out

    def check_step_overflow(self, step: int):
        """Raise if the bond cap forced more than the allowed one-step loss."""
        if (self.max_bond_seen >= self.policy.chi_max
                and self.step_discarded > self.policy.overflow_limit):
            raise TruncationOverflow(step, self.step_discarded, self.policy.overflow_limit)
