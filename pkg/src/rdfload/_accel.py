"""Pick the kernel backend once, at import.

The compiled ``rdfload._kernels`` extension is used when it was built;
otherwise, or when ``RDFLOAD_PURE_PYTHON`` is set to a non-empty value, the
pure-Python ``rdfload._pykernels`` module is used instead.
"""
import os

from rdfload import _pykernels

kernels = _pykernels
if not os.environ.get("RDFLOAD_PURE_PYTHON"):
    try:
        from rdfload import _kernels as kernels  # noqa: F811
    except ImportError:
        pass

BACKEND: str = kernels.BACKEND


def available_backends() -> dict:
    found = {"python": _pykernels}
    try:
        from rdfload import _kernels
    except ImportError:
        return found
    found["cython"] = _kernels
    return found
