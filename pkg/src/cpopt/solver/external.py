"""External solver backend.

The problem is written as the BlockSDP interchange JSON, a configured
command is invoked with the problem and result paths substituted into its
template, and the result document {"status", "objective", "y"} is read
back.  The command template comes from SolverOptions (or the
CPOPT_EXTERNAL_CMD environment variable); nothing is hard-coded.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import tempfile
import time

import numpy as np

from ..relaxation import BlockSDP, block_sdp_to_json
from .ipm import SolveResult, SolveStatus, SolverOptions


def solve_external(sdp: BlockSDP, opts: SolverOptions) -> SolveResult:
    template = opts.external_command or os.environ.get("CPOPT_EXTERNAL_CMD")
    if not template:
        raise ValueError(
            "external backend needs a command template "
            "(SolverOptions.external_command or CPOPT_EXTERNAL_CMD)"
        )
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="cpopt-ext-") as td:
        problem_path = os.path.join(td, "problem.json")
        result_path = os.path.join(td, "result.json")
        with open(problem_path, "w") as fh:
            json.dump(block_sdp_to_json(sdp), fh)
        cmd = [
            part.format(problem=problem_path, result=result_path)
            for part in shlex.split(template)
        ]
        proc = subprocess.run(
            cmd, capture_output=True, text=True, timeout=opts.time_limit
        )
        if proc.returncode != 0:
            raise RuntimeError(
                f"external solver failed (exit {proc.returncode}): {proc.stderr.strip()}"
            )
        with open(result_path) as fh:
            data = json.load(fh)
    status = SolveStatus(data["status"])
    y = np.asarray(data.get("y", []), dtype=float)
    objective = float(data["objective"])
    return SolveResult(
        status=status,
        lower_bound=objective,
        y=y,
        iterations=int(data.get("iterations", -1)),
        residuals=data.get("residuals", {}),
        pcost=float(data.get("pcost", objective)),
        dcost=float(data.get("dcost", objective)),
        message=f"external: {' '.join(cmd)}",
        wall_time=time.perf_counter() - t0,
        y_keys=sdp.y_keys,
    )
