"""Embedded primal-dual interior-point solver for block moment SDPs.

Solves   min c.y  s.t.  A y = b,  M(y) in the PSD-block cone,
together with its dual  max b.lam  s.t.  A'lam + M*(Z) = c, Z PSD.

The method is an infeasible-start Mehrotra predictor-corrector with
Nesterov-Todd scaling.  Every cone operation factors block by block (the
blocks of a clique-decomposed relaxation stay small no matter how many
variables the original problem has), while the Newton system is reduced to
one sparse symmetric quasi-definite KKT matrix

    [ H   A' ]          H_ij = sum_blocks <F_i, W F_j W>
    [ A  -d  ]

refactored once per iteration and shared by the predictor and corrector
solves.  The (2,2) regularization plus iterative refinement against the
unregularized system keeps the factorization stable when equality rows are
nearly dependent.

Unboundedness and infeasibility are reported through divergence tests on
the iterates rather than a homogeneous embedding: a diverging dual with an
improving objective and a vanishing scaled dual residual certifies primal
infeasibility, and symmetrically for unboundedness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .compile import CompiledSDP
from .kernels import get_kernels

__all__ = ["SolveStatus", "SolverOptions", "SolveResult", "solve_compiled"]

_DIVERGENCE = 1e8
_STALL_STEP = 1e-10


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_LIMIT = "numerical_limit"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 200
    backend: str = "embedded"
    external_command: str | None = None
    time_limit: float | None = None
    kernel: str | None = None
    step_fraction: float = 0.99
    verbose: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.backend not in ("embedded", "external"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class SolveResult:
    status: SolveStatus
    lower_bound: float
    y: np.ndarray
    iterations: int
    residuals: dict
    pcost: float
    dcost: float
    message: str = ""
    wall_time: float = 0.0
    y_keys: tuple = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


def _min_eig(cs: CompiledSDP, buf: np.ndarray) -> float:
    worst = np.inf
    for b in range(cs.nblocks):
        s = int(cs.sizes[b])
        X = buf[cs.sq_ptr[b] : cs.sq_ptr[b + 1]].reshape(s, s)
        worst = min(worst, la.eigvalsh(0.5 * (X + X.T), check_finite=False)[0])
    return worst


class _KKT:
    """Sparse factorization of the regularized saddle system.

    Solves refine against the unregularized matrix with residuals
    accumulated in extended precision, which removes both the
    regularization bias and most of the rounding injected by the
    ill-conditioned scaled Hessian near convergence.
    """

    def __init__(self, H: sp.csr_matrix, A: sp.csr_matrix, reg: float):
        m, p = H.shape[0], A.shape[0]
        self.m, self.p = m, p
        K = sp.bmat(
            [
                [H + reg * sp.eye(m), A.T],
                [A, -reg * sp.eye(p)],
            ],
            format="csc",
        )
        self.lu = spla.splu(K)
        self.H_ext = H.astype(np.longdouble)
        self.A_ext = A.astype(np.longdouble)
        self.AT_ext = A.T.astype(np.longdouble).tocsr()

    def solve(self, r1: np.ndarray, r2: np.ndarray, refine: int = 2) -> tuple:
        rhs = np.concatenate([r1, r2])
        x = self.lu.solve(rhs).astype(np.longdouble)
        r1e, r2e = r1.astype(np.longdouble), r2.astype(np.longdouble)
        for _ in range(refine):
            x1, x2 = x[: self.m], x[self.m :]
            res1 = r1e - self.H_ext @ x1 - self.AT_ext @ x2
            res2 = r2e - self.A_ext @ x1
            res = np.concatenate([res1, res2]).astype(float)
            x = x + self.lu.solve(res)
        x = x.astype(float)
        return x[: self.m], x[self.m :]


def solve_compiled(
    cs: CompiledSDP, opts: SolverOptions | None = None, y_keys: tuple = ()
) -> SolveResult:
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    deadline = None if opts.time_limit is None else t0 + opts.time_limit
    K = get_kernels(opts.kernel)
    m, p, nu = cs.m, cs.A.shape[0], cs.cone_dim
    A, b, c = cs.A, cs.b, cs.c
    norm_b = max(1.0, float(np.linalg.norm(b)))
    norm_c = max(1.0, float(np.linalg.norm(c)))

    hess_vals = np.zeros(len(cs.hess_I))

    def build_kkt(rinvbuf) -> _KKT:
        K.hessian_values(cs, rinvbuf, hess_vals)
        H = sp.coo_matrix((hess_vals, (cs.hess_I, cs.hess_J)), shape=(m, m)).tocsr()
        scale = max(1.0, float(np.max(np.abs(hess_vals)))) if len(hess_vals) else 1.0
        last_err = None
        for bump in (1e-12, 1e-9, 1e-6):
            try:
                return _KKT(H, A, bump * scale)
            except RuntimeError as err:  # singular factorization
                last_err = err
        raise RuntimeError(f"KKT factorization failed: {last_err}")

    # workspaces
    S = cs.new_buffer()
    Z = cs.new_buffer()
    R = cs.new_buffer()
    Rinv = cs.new_buffer()
    My = cs.new_buffer()
    Q = cs.new_buffer()
    WiQ = cs.new_buffer()
    Rc = cs.new_buffer()
    dS = cs.new_buffer()
    dZ = cs.new_buffer()
    Corr = cs.new_buffer()
    sig = np.zeros(nu)

    def result(status, iters, res, pc, dc, msg=""):
        bound = dc if np.isfinite(dc) else float("nan")
        if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
            bound = float("nan")
        return SolveResult(
            status=status,
            lower_bound=bound,
            y=y.copy(),
            iterations=iters,
            residuals=res,
            pcost=pc,
            dcost=dc,
            message=msg,
            wall_time=time.perf_counter() - t0,
            y_keys=y_keys,
        )

    # initial point: least-norm cone images subject to the equalities,
    # shifted into the interior (scaling W = I)
    ident = cs.identity_buffer()
    try:
        kkt0 = build_kkt(ident)
        y, _ = kkt0.solve(np.zeros(m), b)
        u, lam = kkt0.solve(c, np.zeros(p))
    except RuntimeError as err:
        y = np.zeros(m)
        return result(
            SolveStatus.NUMERICAL_LIMIT, 0, {}, np.nan, np.nan, f"init failed: {err}"
        )
    K.eval_blocks(cs, y, S)
    shift = -_min_eig(cs, S)
    if shift >= -1e-8:
        S[cs.diag_idx] += 1.0 + shift
    K.eval_blocks(cs, u, Z)
    shift = -_min_eig(cs, Z)
    if shift >= -1e-8:
        Z[cs.diag_idx] += 1.0 + shift

    pcost = dcost = np.nan
    residuals: dict = {}
    stall = 0
    status, msg = SolveStatus.ITERATION_LIMIT, "iteration limit reached"
    iters = 0
    best_score = np.inf
    best = None
    best_it = 0
    ap = ad = 0.0
    dy = np.zeros(m)
    dlam = np.zeros(p)

    for it in range(opts.max_iters):
        iters = it
        K.eval_blocks(cs, y, My)
        rz = S - My
        ry = b - A @ y
        rx = c - A.T @ lam - K.adjoint_blocks(cs, Z)
        gap = float(S @ Z)
        mu = max(gap / nu, 1e-300)
        pcost = float(c @ y)
        dcost = float(b @ lam)
        res_p = float(np.sqrt(np.linalg.norm(ry) ** 2 + np.linalg.norm(rz) ** 2)) / norm_b
        res_d = float(np.linalg.norm(rx)) / norm_c
        relgap = abs(gap) / max(1.0, abs(pcost))
        residuals = {"primal": res_p, "dual": res_d, "gap": relgap}
        score = max(res_p, res_d, relgap)
        if score < best_score:
            best_score = score
            best = (y.copy(), pcost, dcost, dict(residuals))
            best_it = it
        if opts.verbose:
            print(
                f"  it {it:3d}  pcost {pcost:+.9e}  dcost {dcost:+.9e}  "
                f"rp {res_p:.2e}  rd {res_d:.2e}  gap {relgap:.2e}  mu {mu:.2e}"
            )

        if best_score <= opts.tol:
            status, msg = SolveStatus.OPTIMAL, ""
            break
        if it - best_it >= 8:
            status, msg = SolveStatus.NUMERICAL_LIMIT, "progress stagnated"
            break

        theta_d = max(float(np.max(np.abs(lam), initial=0.0)), float(np.max(np.abs(Z), initial=0.0)))
        theta_p = max(float(np.max(np.abs(y), initial=0.0)), float(np.max(np.abs(S), initial=0.0)))
        if theta_d > _DIVERGENCE:
            cert = float(np.linalg.norm(c - rx)) / theta_d
            if dcost > opts.tol * theta_d and cert < 1e-6:
                status, msg = SolveStatus.INFEASIBLE, "diverging dual improving ray"
                break
            status, msg = SolveStatus.NUMERICAL_LIMIT, "dual iterates diverged"
            break
        if theta_p > _DIVERGENCE:
            prim_ray = (
                float(np.sqrt(np.linalg.norm(A @ y - b) ** 2 + np.linalg.norm(rz) ** 2))
                / theta_p
            )
            if pcost < -opts.tol * theta_p and prim_ray < 1e-6:
                status, msg = SolveStatus.UNBOUNDED, "diverging primal improving ray"
                break
            status, msg = SolveStatus.NUMERICAL_LIMIT, "primal iterates diverged"
            break
        if deadline is not None and time.perf_counter() > deadline:
            status, msg = SolveStatus.ITERATION_LIMIT, "time limit reached"
            break

        # a fraction-to-boundary step can still lose definiteness to
        # rounding when the blocks are nearly singular; roll the last step
        # back by halves until the factorizations go through again
        rolled = 0
        while not K.compute_scalings(cs, S, Z, R, Rinv, sig):
            if best is None or rolled >= 8 or it == 0:
                rolled = -1
                break
            ap *= 0.5
            ad *= 0.5
            y -= ap * dy
            S -= ap * dS
            lam -= ad * dlam
            Z -= ad * dZ
            rolled += 1
        if rolled == -1:
            status, msg = SolveStatus.NUMERICAL_LIMIT, "scaling factorization failed"
            break
        if rolled:
            continue
        try:
            kkt = build_kkt(Rinv)
        except RuntimeError as err:
            status, msg = SolveStatus.NUMERICAL_LIMIT, str(err)
            break

        def newton(rc_buf):
            np.add(rc_buf, rz, out=Q)
            K.conjugate_winv(cs, Rinv, Q, WiQ)
            g = K.adjoint_blocks(cs, WiQ) - rx
            dy, w = kkt.solve(g, ry)
            dlam = -w
            K.eval_blocks(cs, dy, dS)
            np.subtract(dS, rz, out=dS)
            np.subtract(rc_buf, dS, out=Q)
            K.conjugate_winv(cs, Rinv, Q, dZ)
            return dy, dlam

        # predictor
        np.negative(S, out=Rc)
        dy, dlam = newton(Rc)
        ap = min(1.0, K.max_step(cs, S, dS))
        ad = min(1.0, K.max_step(cs, Z, dZ))
        mu_aff = float((S + ap * dS) @ (Z + ad * dZ)) / nu
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        K.scaled_sym_product(cs, R, Rinv, dS, dZ, Corr)
        np.negative(Corr, out=Corr)
        Corr[cs.diag_idx] += sigma * mu - sig**2
        K.make_rc(cs, R, sig, Corr, Rc)
        dy, dlam = newton(Rc)

        ap = min(1.0, opts.step_fraction * K.max_step(cs, S, dS))
        ad = min(1.0, opts.step_fraction * K.max_step(cs, Z, dZ))
        if opts.verbose:
            print(f"        sigma {sigma:.2e}  ap {ap:.3f}  ad {ad:.3f}")
        if max(ap, ad) < _STALL_STEP:
            stall += 1
            if stall >= 3:
                status, msg = SolveStatus.NUMERICAL_LIMIT, "step sizes collapsed"
                break
        else:
            stall = 0
        y += ap * dy
        S += ap * dS
        lam += ad * dlam
        Z += ad * dZ
    else:
        iters = opts.max_iters

    if best is not None and status not in (
        SolveStatus.INFEASIBLE,
        SolveStatus.UNBOUNDED,
    ):
        y, pcost, dcost, residuals = best
        if best_score <= opts.tol:
            status, msg = SolveStatus.OPTIMAL, ""
    return result(status, iters, residuals, pcost, dcost, msg)
