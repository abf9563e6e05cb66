"""Flatten a BlockSDP into the array layout the numeric kernels expect.

The block-diagonal iterate lives in one contiguous buffer holding each
dense s_b x s_b block at offset sq_ptr[b].  The linear map from moment
variables to block entries is stored twice: entry-major (every stored
lower-triangle entry with its linear form) for fast evaluation/adjoint, and
variable-major per block (each local variable with its entry list) for the
Hessian assembly.  The Hessian sparsity pattern over the global variables
is fixed, so its COO indices are precomputed here once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..relaxation import BlockSDP


@dataclass
class CompiledSDP:
    m: int
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    nblocks: int
    sizes: np.ndarray
    sq_ptr: np.ndarray
    sizes_off: np.ndarray
    diag_idx: np.ndarray
    cone_dim: int
    # entry-major
    ent_lo: np.ndarray
    ent_up: np.ndarray
    ent_mult: np.ndarray
    lf_ptr: np.ndarray
    lf_y: np.ndarray
    lf_c: np.ndarray
    lf_counts: np.ndarray
    # variable-major
    blk_var_ptr: np.ndarray
    gvar: np.ndarray
    var_ent_ptr: np.ndarray
    ve_r: np.ndarray
    ve_c: np.ndarray
    ve_coef: np.ndarray
    # Hessian COO pattern
    hess_I: np.ndarray
    hess_J: np.ndarray
    hess_blk_ptr: np.ndarray
    _dense_F: list | None = field(default=None, repr=False)

    @property
    def total_sq(self) -> int:
        return int(self.sq_ptr[-1])

    def new_buffer(self) -> np.ndarray:
        return np.zeros(self.total_sq)

    def identity_buffer(self, scale: float = 1.0) -> np.ndarray:
        buf = self.new_buffer()
        for b in range(self.nblocks):
            s = int(self.sizes[b])
            blk = buf[self.sq_ptr[b] : self.sq_ptr[b + 1]].reshape(s, s)
            np.fill_diagonal(blk, scale)
        return buf

    def views(self, buf: np.ndarray) -> list[np.ndarray]:
        return [
            buf[self.sq_ptr[b] : self.sq_ptr[b + 1]].reshape(
                int(self.sizes[b]), int(self.sizes[b])
            )
            for b in range(self.nblocks)
        ]

    def dense_factors(self) -> list[np.ndarray]:
        """Per block, the dense (q_b, s_b, s_b) stack of symmetric basis
        matrices dM/dy_i for the block's local variables (pure kernels)."""
        if self._dense_F is None:
            stacks = []
            for b in range(self.nblocks):
                s = int(self.sizes[b])
                q = int(self.blk_var_ptr[b + 1] - self.blk_var_ptr[b])
                F = np.zeros((q, s, s))
                for loc in range(q):
                    gi = self.blk_var_ptr[b] + loc
                    for e in range(self.var_ent_ptr[gi], self.var_ent_ptr[gi + 1]):
                        r, cc, co = int(self.ve_r[e]), int(self.ve_c[e]), self.ve_coef[e]
                        F[loc, r, cc] += co
                        if r != cc:
                            F[loc, cc, r] += co
                stacks.append(F)
            self._dense_F = stacks
        return self._dense_F


def compile_sdp(sdp: BlockSDP) -> CompiledSDP:
    m = sdp.y_count
    c = np.zeros(m)
    for y, v in sdp.objective:
        c[y] += v

    rows, cols, vals = [], [], []
    b_vec = np.asarray(sdp.eq_rhs, dtype=float).copy()
    for i, row in enumerate(sdp.eq_rows):
        scale = max(abs(v) for _, v in row)
        for y, v in row:
            rows.append(i)
            cols.append(y)
            vals.append(v / scale)
        b_vec[i] /= scale
    A = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(sdp.eq_rows), m), dtype=float
    )
    A.sum_duplicates()

    nb = len(sdp.blocks)
    sizes = np.array([blk.size for blk in sdp.blocks], dtype=np.int64)
    sq_ptr = np.zeros(nb + 1, dtype=np.int64)
    np.cumsum(sizes**2, out=sq_ptr[1:])
    sizes_off = np.zeros(nb + 1, dtype=np.int64)
    np.cumsum(sizes, out=sizes_off[1:])
    diag_idx = np.concatenate(
        [sq_ptr[b] + np.arange(sizes[b]) * (sizes[b] + 1) for b in range(nb)]
    ).astype(np.int64) if nb else np.zeros(0, dtype=np.int64)

    ent_lo, ent_up, ent_mult = [], [], []
    lf_ptr, lf_y, lf_c = [0], [], []
    blk_var_ptr = [0]
    gvar: list[int] = []
    var_ent_ptr = [0]
    ve_r: list[int] = []
    ve_c: list[int] = []
    ve_coef: list[float] = []
    hess_I: list[np.ndarray] = []
    hess_J: list[np.ndarray] = []
    hess_blk_ptr = [0]

    for bidx, blk in enumerate(sdp.blocks):
        s = blk.size
        off = int(sq_ptr[bidx])
        local: dict[int, list[tuple[int, int, float]]] = {}
        for (i, j), form in sorted(blk.entries.items()):
            ent_lo.append(off + i * s + j)
            ent_up.append(off + j * s + i)
            ent_mult.append(1.0 if i == j else 2.0)
            for y, v in form:
                lf_y.append(y)
                lf_c.append(v)
                local.setdefault(y, []).append((i, j, v))
            lf_ptr.append(len(lf_y))
        loc_vars = sorted(local)
        for y in loc_vars:
            gvar.append(y)
            for (i, j, v) in local[y]:
                ve_r.append(i)
                ve_c.append(j)
                ve_coef.append(v)
            var_ent_ptr.append(len(ve_r))
        blk_var_ptr.append(len(gvar))
        q = len(loc_vars)
        gv = np.asarray(loc_vars, dtype=np.int64)
        hess_I.append(np.repeat(gv, q))
        hess_J.append(np.tile(gv, q))
        hess_blk_ptr.append(hess_blk_ptr[-1] + q * q)

    return CompiledSDP(
        m=m,
        c=c,
        A=A,
        b=b_vec,
        nblocks=nb,
        sizes=sizes,
        sq_ptr=sq_ptr,
        sizes_off=sizes_off,
        diag_idx=diag_idx,
        cone_dim=int(sizes.sum()),
        ent_lo=np.asarray(ent_lo, dtype=np.int64),
        ent_up=np.asarray(ent_up, dtype=np.int64),
        ent_mult=np.asarray(ent_mult, dtype=float),
        lf_ptr=np.asarray(lf_ptr, dtype=np.int64),
        lf_y=np.asarray(lf_y, dtype=np.int64),
        lf_c=np.asarray(lf_c, dtype=float),
        lf_counts=np.diff(np.asarray(lf_ptr, dtype=np.int64)),
        blk_var_ptr=np.asarray(blk_var_ptr, dtype=np.int64),
        gvar=np.asarray(gvar, dtype=np.int64),
        var_ent_ptr=np.asarray(var_ent_ptr, dtype=np.int64),
        ve_r=np.asarray(ve_r, dtype=np.int32),
        ve_c=np.asarray(ve_c, dtype=np.int32),
        ve_coef=np.asarray(ve_coef, dtype=float),
        hess_I=np.concatenate(hess_I) if hess_I else np.zeros(0, dtype=np.int64),
        hess_J=np.concatenate(hess_J) if hess_J else np.zeros(0, dtype=np.int64),
        hess_blk_ptr=np.asarray(hess_blk_ptr, dtype=np.int64),
    )
