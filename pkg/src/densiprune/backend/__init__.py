"""Kernel backend selection.

Tries the compiled extension first and falls back to the pure-numpy
implementation. DENSIPRUNE_BACKEND forces the choice:

  DENSIPRUNE_BACKEND=cython   require the extension, fail loudly if missing
  DENSIPRUNE_BACKEND=python   skip the extension
  (unset / auto)              prefer the extension when importable

`kernels` is the selected module; both expose the same functions with the
same layouts, so everything above this package is backend-agnostic.
"""

import os

from densiprune.backend import _kernels_py

_choice = os.environ.get("DENSIPRUNE_BACKEND", "auto").lower()

if _choice not in ("auto", "cython", "python"):
    raise ValueError(f"DENSIPRUNE_BACKEND must be auto, cython or python; got {_choice!r}")

if _choice == "python":
    kernels = _kernels_py
else:
    try:
        from densiprune.backend import _kernels as _compiled
        kernels = _compiled
    except ImportError:
        if _choice == "cython":
            raise ImportError(
                "DENSIPRUNE_BACKEND=cython but the compiled extension is not "
                "available; build it with `python setup.py build_ext --inplace`")
        kernels = _kernels_py

BACKEND_NAME = kernels.NAME


def get_kernels(name=None):
    """Return a kernel module by name ('python', 'cython') or the default."""
    if name is None or name == "auto":
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from densiprune.backend import _kernels as compiled
        return compiled
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name):
    """Switch the active kernel module in place (benchmarking/testing hook).

    Layer code resolves `backend.kernels` per call, so the switch affects
    all subsequent forward/backward work in the process.
    """
    global kernels, BACKEND_NAME
    kernels = get_kernels(name)
    BACKEND_NAME = kernels.NAME
    return kernels
