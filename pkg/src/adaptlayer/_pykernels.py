"""Pure-numpy kernels, used when the compiled extension is unavailable."""

from __future__ import annotations

import numpy as np


def _parity_signs(dim: int, zmask: int) -> np.ndarray:
    idx = np.arange(dim, dtype=np.int64)
    return 1.0 - 2.0 * (np.bitwise_count(idx & zmask) & 1)


def rotate_pairs(state, src, dst, sign, c, s):
    a = state[src]
    b = state[dst]
    ss = (s * sign)[:, None]
    state[src] = c * a - ss * b
    state[dst] = ss * a + c * b


def generator_apply(state, src, dst, sign):
    out = np.zeros_like(state)
    out[dst] = sign[:, None] * state[src]
    out[src] = -sign[:, None] * state[dst]
    return out


def generator_overlap(bra, ket, src, dst, sign):
    return complex(np.sum(sign * (np.conj(bra[dst]) * ket[src] - np.conj(bra[src]) * ket[dst])))


def pauli_sum_apply(xmask, zmask, coef, state):
    dim = state.shape[0]
    idx = np.arange(dim, dtype=np.int64)
    out = np.zeros(dim, dtype=np.complex128)
    for xm, zm, cf in zip(xmask, zmask, coef):
        v = _parity_signs(dim, int(zm)) * state
        out += cf * v[idx ^ xm]
    return out


def pauli_expectations(xmask, zmask, phase, state):
    dim = state.shape[0]
    idx = np.arange(dim, dtype=np.int64)
    out = np.empty(len(xmask), dtype=np.complex128)
    for t, (xm, zm, ph) in enumerate(zip(xmask, zmask, phase)):
        v = _parity_signs(dim, int(zm)) * state
        out[t] = ph * np.vdot(state[idx ^ xm], v)
    return out
