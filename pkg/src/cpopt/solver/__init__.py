"""Solve block moment SDPs and read candidate minimizers off the moments."""

from __future__ import annotations

import numpy as np

from ..cliques import xvar
from ..lifting import LiftedPOP
from ..polynomials import CPPoly, cp_eval
from ..relaxation import BlockSDP
from .compile import CompiledSDP, compile_sdp
from .ipm import SolveResult, SolveStatus, SolverOptions, solve_compiled
from .kernels import DEFAULT_KERNEL, HAVE_COMPILED, get_kernels

__all__ = [
    "SolveResult",
    "SolveStatus",
    "SolverOptions",
    "CompiledSDP",
    "compile_sdp",
    "solve_compiled",
    "solve_block_sdp",
    "extract_candidate",
    "HAVE_COMPILED",
    "DEFAULT_KERNEL",
    "get_kernels",
]


def solve_block_sdp(sdp: BlockSDP, opts: SolverOptions | None = None) -> SolveResult:
    """Solve with the embedded interior-point method, or round-trip the
    problem through the JSON interchange to a configured external command."""
    opts = opts or SolverOptions()
    if opts.backend == "external":
        from .external import solve_external

        return solve_external(sdp, opts)
    cs = compile_sdp(sdp)
    return solve_compiled(cs, opts, y_keys=sdp.y_keys)


def extract_candidate(
    res: SolveResult, p: LiftedPOP, f: CPPoly
) -> tuple[np.ndarray, float]:
    """First-moment candidate point and its objective value.

    Reads x_i off the degree-one moments (shared across every clique
    containing the variable), clamps to the box, and evaluates the CP form
    there; the returned value is a valid upper bound on the minimum.
    """
    if res.status is not SolveStatus.OPTIMAL:
        raise ValueError("candidate extraction needs an optimal solve")
    key_index = {k: i for i, k in enumerate(res.y_keys)}
    vindex = p.var_index
    x = np.empty(p.n)
    for i in range(1, p.n + 1):
        key = ((vindex[xvar(i)], 1),)
        x[i - 1] = res.y[key_index[key]]
    np.clip(x, -p.box_radius, p.box_radius, out=x)
    return x, float(cp_eval(f, x))
