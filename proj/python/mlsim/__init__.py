"""Message-logging rollback recovery simulator."""

import json

from ._core import (
    ConfigError,
    Error,
    IoError,
    ProtocolError,
    VerificationError,
    csv_header,
    verify,
)
from . import _core

__all__ = [
    "ConfigError",
    "Error",
    "IoError",
    "ProtocolError",
    "VerificationError",
    "csv_header",
    "run",
    "sweep",
    "verify",
]


def _config(kernel, fail=(), **options):
    cfg = {"kernel": kernel, "fail": list(fail)}
    cfg.update({k: v for k, v in options.items() if v is not None})
    return json.dumps(cfg)


def run(kernel="cg", *, fail=(), trace=False, **options):
    """Run one simulation.

    Options use the config file keys: procs, iters, seed, cp_int, log_size,
    mode, out, cg_n, stencil_edge. Failures are "rank:iter:phase" strings.
    Returns a dict with metrics, recoveries and, if requested, the trace.
    """
    return _core.run_json(_config(kernel, fail, **options), trace)


def sweep(kernel="cg", *, ranks=(), from_iter=0, to_iter=0, phases=(), **options):
    """Inject one failure per (rank, iteration, phase) and compare with a fault-free run."""
    return _core.sweep_json(_config(kernel, **options), list(ranks), from_iter, to_iter, list(phases))
