"""Selects the kernel backend: numba-compiled hot loops or pure numpy.

Resolution order: explicit argument, then the NLRB_BACKEND environment
variable ("numba" or "numpy"), then numba when it is importable. Both
backends implement the same kernel signatures and semantics; results agree
to rounding but are not bitwise identical across backends, so pipeline
determinism is guaranteed per backend.
"""

from __future__ import annotations

import os

from .errors import ConfigError

NUMPY = "numpy"
NUMBA = "numba"
BACKENDS = (NUMPY, NUMBA)

_ENV_VAR = "NLRB_BACKEND"


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def backend_name(override: str | None = None) -> str:
    """Resolve the backend name from override, environment, availability."""
    name = override or os.environ.get(_ENV_VAR)
    if name is None:
        return NUMBA if _numba_available() else NUMPY
    name = name.strip().lower()
    if name not in BACKENDS:
        raise ConfigError(f"backend must be one of {BACKENDS}, got {name!r}")
    if name == NUMBA and not _numba_available():
        raise ConfigError("numba backend requested but numba is not importable")
    return name


def kernels(override: str | None = None):
    """Return the kernel module for the resolved backend."""
    name = backend_name(override)
    if name == NUMBA:
        from . import kernels_nb

        return kernels_nb
    from . import kernels_np

    return kernels_np
