"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure numpy
versions are used. Setting ``GSIGA_PURE_PYTHON=1`` forces the fallback.
"""
import importlib
import os

from . import _kernels_py

BACKENDS = ("cython", "python")


def load_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("gsiga._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    out = []
    for name in BACKENDS:
        try:
            load_backend(name)
        except ImportError:
            continue
        out.append(name)
    return out


if os.environ.get("GSIGA_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
else:
    BACKEND = "cython" if "cython" in available_backends() else "python"

_impl = load_backend(BACKEND)

find_spans = _impl.find_spans
basis_funs_ders = _impl.basis_funs_ders
element_mass = _impl.element_mass
element_stiffness = _impl.element_stiffness
element_load = _impl.element_load
