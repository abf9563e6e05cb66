"""Global lower bounds for polynomials in sum-of-separable (CP) form.

The pipeline: lift the rank-one partial products, decompose the resulting
interaction graph into a clique tree of width min(n, r+1), assemble the
clique-wise block moment relaxation, solve it with the embedded
interior-point method, and read a candidate minimizer off the first
moments.
"""

from .cliques import (
    CliqueTree,
    SparsityGraph,
    build_lr_graph,
    chordal_extend,
    clique_tree,
    peo_order,
    verify_rip,
)
from .lifting import (
    CliqueAssignment,
    LiftedPOP,
    assign_to_cliques,
    build_lifted_pop,
)
from .polynomials import (
    Basis,
    CPPoly,
    DensePoly,
    UniPoly,
    basis_convert,
    cp_eval,
    cp_expand,
    cppoly_from_json,
    cppoly_to_json,
    gen_bernstein_instance,
    gen_monomial_instance,
    lipschitz_bound,
    uni_eval,
)
from .relaxation import (
    BlockSDP,
    ComplexityReport,
    MonomialBasis,
    assemble_dense_moment_sdp,
    assemble_lr_moment_sdp,
    clique_monomials,
    complexity_report,
)
from .solver import (
    SolveResult,
    SolveStatus,
    SolverOptions,
    extract_candidate,
    solve_block_sdp,
)

__version__ = "0.1.0"
