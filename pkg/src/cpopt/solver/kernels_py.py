"""Pure-numpy block kernels (fallback when the compiled extension is
unavailable, and the reference the extension is tested against).

Operations touching every entry (evaluation, adjoint) are vectorized across
all blocks at once; the per-block dense factor stacks drive the Hessian
through batched matmuls.  Layouts come from compile.CompiledSDP.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

BACKEND = "pure"


def eval_blocks(cs, y, out):
    """out <- M(y) as the concatenated dense block buffer."""
    vals = cs.lf_c * y[cs.lf_y]
    ev = np.add.reduceat(vals, cs.lf_ptr[:-1]) if len(vals) else np.zeros(0)
    out[:] = 0.0
    out[cs.ent_lo] = ev
    out[cs.ent_up] = ev
    return out


def adjoint_blocks(cs, zbuf, out=None):
    """out <- M*(Z) for a symmetric concatenated buffer Z."""
    w = zbuf[cs.ent_lo] * cs.ent_mult
    contrib = np.repeat(w, cs.lf_counts) * cs.lf_c
    res = np.bincount(cs.lf_y, weights=contrib, minlength=cs.m)
    if out is None:
        return res
    out[:] = res
    return out


def compute_scalings(cs, sbuf, zbuf, rbuf, rinvbuf, sig):
    """Nesterov-Todd scaling per block.

    Writes R with W = R R^T, W Z W = S, its inverse, and the scaled point
    spectrum sigma (R^T Z R = R^-1 S R^-T = diag(sig)).  Returns False when
    a block is numerically indefinite.
    """
    for b in range(cs.nblocks):
        s = int(cs.sizes[b])
        sl = slice(cs.sq_ptr[b], cs.sq_ptr[b + 1])
        S = sbuf[sl].reshape(s, s)
        Z = zbuf[sl].reshape(s, s)
        try:
            Ls = la.cholesky(S, lower=True, check_finite=False)
            Lz = la.cholesky(Z, lower=True, check_finite=False)
        except la.LinAlgError:
            return False
        U, sv, Vt = la.svd(Lz.T @ Ls, check_finite=False)
        if sv[-1] <= 0:
            return False
        isq = 1.0 / np.sqrt(sv)
        rbuf[sl] = ((Ls @ Vt.T) * isq).ravel()
        rinvbuf[sl] = (((Lz @ U) * isq).T).ravel()
        sig[cs.sizes_off[b] : cs.sizes_off[b] + s] = sv
    return True


def hessian_values(cs, rinvbuf, vals):
    """Per-block Gram matrices <F_i, W^-1 F_j W^-1> flattened into the
    fixed COO value layout (W^-1 = Rinv^T Rinv)."""
    stacks = cs.dense_factors()
    for b in range(cs.nblocks):
        s = int(cs.sizes[b])
        sl = slice(cs.sq_ptr[b], cs.sq_ptr[b + 1])
        Ri = rinvbuf[sl].reshape(s, s)
        Wi = Ri.T @ Ri
        F = stacks[b]
        q = F.shape[0]
        T = np.matmul(Wi, np.matmul(F, Wi))
        H = F.reshape(q, s * s) @ T.reshape(q, s * s).T
        vals[cs.hess_blk_ptr[b] : cs.hess_blk_ptr[b + 1]] = H.ravel()
    return vals


def conjugate_winv(cs, rinvbuf, qbuf, out):
    """out <- W^-1 Q W^-1 blockwise, using W^-1 = Rinv^T Rinv."""
    for b in range(cs.nblocks):
        s = int(cs.sizes[b])
        sl = slice(cs.sq_ptr[b], cs.sq_ptr[b + 1])
        Ri = rinvbuf[sl].reshape(s, s)
        Q = qbuf[sl].reshape(s, s)
        M = Ri @ Q @ Ri.T
        out[sl] = (Ri.T @ M @ Ri).ravel()
    return out


def make_rc(cs, rbuf, sig, rhsbuf, out):
    """out <- R T R^T with T_ij = 2 RHS_ij / (sig_i + sig_j).

    RHS is given in the scaled space; the division inverts the symmetrized
    product with the diagonal scaled point.
    """
    for b in range(cs.nblocks):
        s = int(cs.sizes[b])
        sl = slice(cs.sq_ptr[b], cs.sq_ptr[b + 1])
        R = rbuf[sl].reshape(s, s)
        sg = sig[cs.sizes_off[b] : cs.sizes_off[b] + s]
        T = 2.0 * rhsbuf[sl].reshape(s, s) / np.add.outer(sg, sg)
        out[sl] = (R @ T @ R.T).ravel()
    return out


def scaled_sym_product(cs, rbuf, rinvbuf, dsbuf, dzbuf, out):
    """out <- sym(D_S D_Z) with D_S = Rinv dS Rinv^T and D_Z = R^T dZ R."""
    for b in range(cs.nblocks):
        s = int(cs.sizes[b])
        sl = slice(cs.sq_ptr[b], cs.sq_ptr[b + 1])
        R = rbuf[sl].reshape(s, s)
        Ri = rinvbuf[sl].reshape(s, s)
        DS = Ri @ dsbuf[sl].reshape(s, s) @ Ri.T
        DZ = R.T @ dzbuf[sl].reshape(s, s) @ R
        P = DS @ DZ
        out[sl] = (0.5 * (P + P.T)).ravel()
    return out


def max_step(cs, xbuf, dxbuf):
    """Largest alpha with X + alpha dX still PSD (blockwise minimum)."""
    alpha = np.inf
    for b in range(cs.nblocks):
        s = int(cs.sizes[b])
        sl = slice(cs.sq_ptr[b], cs.sq_ptr[b + 1])
        X = xbuf[sl].reshape(s, s)
        dX = dxbuf[sl].reshape(s, s)
        try:
            L = la.cholesky(X, lower=True, check_finite=False)
        except la.LinAlgError:
            return 0.0
        A = la.solve_triangular(L, dX, lower=True, check_finite=False)
        B = la.solve_triangular(L, A.T, lower=True, check_finite=False)
        lmin = la.eigvalsh(0.5 * (B + B.T), check_finite=False)[0]
        if lmin < 0:
            alpha = min(alpha, -1.0 / lmin)
    return alpha
