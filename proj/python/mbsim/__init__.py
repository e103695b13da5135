"""Multiband scheduling simulator with the solver in the loop."""

import os
import shutil
import sysconfig

from ._core import (
    Instance,
    InputError,
    RuntimeFailure,
    brute_force_optimal,
    cmd_solve,
    objective,
    parse_lp,
    parse_solution_xml,
    schedule,
    self_exec_command,
    snapshots,
    solution_xml,
    solve_bb,
    solve_external,
    twin,
    write_lp,
)
from . import _core

__all__ = [
    "Instance",
    "InputError",
    "RuntimeFailure",
    "brute_force_optimal",
    "cli_binary",
    "cmd_bench",
    "cmd_snapshots",
    "cmd_solve",
    "cmd_twin",
    "objective",
    "parse_lp",
    "parse_solution_xml",
    "schedule",
    "self_exec_command",
    "snapshots",
    "solution_xml",
    "solve_bb",
    "solve_external",
    "twin",
    "write_lp",
]


def cli_binary():
    """Path of the mbsim executable: $MBSIM_CLI, the installed script, or PATH."""
    found = (
        os.environ.get("MBSIM_CLI")
        or shutil.which("mbsim", path=sysconfig.get_path("scripts"))
        or shutil.which("mbsim")
    )
    if not found:
        raise FileNotFoundError("mbsim executable not found; set MBSIM_CLI")
    return found


def _with_binary(fn):
    def run(config, out=None, seed=None, keep_files=False, jobs=1, self_binary=None):
        return fn(config, out, seed, keep_files, jobs, self_binary or cli_binary())

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


cmd_twin = _with_binary(_core.cmd_twin)
cmd_snapshots = _with_binary(_core.cmd_snapshots)
cmd_bench = _with_binary(_core.cmd_bench)
