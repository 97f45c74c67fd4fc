"""Backend selection for the statevector kernels.

The compiled extension is used when it imports; set ``ADAPTLAYER_PURE_PYTHON=1``
to force the numpy implementation.  All arrays passed in must already have the
dtypes the kernels expect (complex128 states, int64 index/mask arrays,
float64 signs); the wrappers below take care of the common conversions.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_FORCE_PURE = os.environ.get("ADAPTLAYER_PURE_PYTHON", "").strip() not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def backend_module(name: str | None = None):
    """Return the kernel module for ``name`` ("cython"/"python"), default active."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def _as_rows(state: np.ndarray) -> np.ndarray:
    return state.reshape(state.shape[0], -1)


def rotate_pairs(state: np.ndarray, src, dst, sign, theta: float) -> None:
    """Apply exp(theta*T) in place; ``state`` is (dim,) or (dim, k), C-contiguous complex128."""
    _impl.rotate_pairs(_as_rows(state), src, dst, sign, float(np.cos(theta)), float(np.sin(theta)))


def generator_apply(state: np.ndarray, src, dst, sign) -> np.ndarray:
    out = _impl.generator_apply(_as_rows(state), src, dst, sign)
    return np.asarray(out).reshape(state.shape)


def generator_overlap(bra: np.ndarray, ket: np.ndarray, src, dst, sign) -> complex:
    return complex(_impl.generator_overlap(bra, ket, src, dst, sign))


def pauli_sum_apply(xmask, zmask, coef, state: np.ndarray) -> np.ndarray:
    return np.asarray(_impl.pauli_sum_apply(xmask, zmask, coef, state))


def pauli_expectations(xmask, zmask, phase, state: np.ndarray) -> np.ndarray:
    return np.asarray(_impl.pauli_expectations(xmask, zmask, phase, state))
