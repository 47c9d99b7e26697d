"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``RELAXCTL_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("RELAXCTL_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

adjoint_sweep = _impl.adjoint_sweep
hamiltonian_argmax = _impl.hamiltonian_argmax

__all__ = ["BACKEND", "adjoint_sweep", "hamiltonian_argmax"]
