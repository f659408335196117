"""Kernel backend selection.

The compiled extension is preferred; the NumPy implementation is used when
it cannot be imported or when ``HDQKD_BACKEND=python`` is set.
"""
import os

from hdqkd import _pykernels

python_backend = _pykernels

try:
    from hdqkd import _kernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("HDQKD_BACKEND", "").lower() != "python":
    _active = compiled_backend
    BACKEND = "compiled"
else:
    _active = python_backend
    BACKEND = "python"

jacobi_eigh = _active.jacobi_eigh
secular_max_root = _active.secular_max_root
completion_pass = _active.completion_pass
