"""Reference implementation of the external-solver protocol.

Usage:  python -m cpopt.solver.external_worker PROBLEM.json RESULT.json

Reads the BlockSDP interchange document, solves it with the embedded
method, and writes the result document.  Useful for exercising the
external backend end to end and as a template for real solver bridges.
"""

from __future__ import annotations

import json
import sys

from ..relaxation import block_sdp_from_json
from . import solve_block_sdp
from .ipm import SolverOptions


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    problem_path, result_path = argv
    with open(problem_path) as fh:
        sdp = block_sdp_from_json(json.load(fh))
    res = solve_block_sdp(sdp, SolverOptions())
    doc = {
        "status": res.status.value,
        "objective": res.lower_bound,
        "y": [float(v) for v in res.y],
        "iterations": res.iterations,
        "pcost": res.pcost,
        "dcost": res.dcost,
        "residuals": res.residuals,
    }
    with open(result_path, "w") as fh:
        json.dump(doc, fh)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
