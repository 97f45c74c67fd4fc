"""Independent dense-matrix reference implementations used only by the tests.

Everything here is built from explicit Kronecker products so it shares no
code with the package's bit-mask kernels.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.linalg

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
LETTER = {"I": I2, "X": X, "Y": Y, "Z": Z}
# |0><1|: lowers an occupied qubit (|1>) to empty (|0>)
QLOW = np.array([[0, 1], [0, 0]], dtype=complex)


def embed(ops: dict[int, np.ndarray], n: int) -> np.ndarray:
    """Tensor product with qubit 0 as the least significant (rightmost) factor."""
    return reduce(np.kron, [ops.get(q, I2) for q in reversed(range(n))])


def pauli_matrix(ops, n):
    return embed({q: LETTER[p] for q, p in ops}, n)


def qubit_annihilator(p, n):
    return embed({p: QLOW}, n)


def fermion_annihilator(p, n):
    return embed({**{q: Z for q in range(p)}, p: QLOW}, n)


def excitation_matrix(create, annihilate, n, fermionic):
    low = fermion_annihilator if fermionic else qubit_annihilator
    g = np.eye(1 << n, dtype=complex)
    for k in create:
        g = g @ low(k, n).conj().T
    for l in annihilate:
        g = g @ low(l, n)
    return g - g.conj().T


def element_generator(e):
    n = e.n_qubits
    if e.pauli is not None:
        return 1j * pauli_matrix(e.pauli.ops(), n)
    return excitation_matrix(e.create, e.annihilate, n, e.family == "fermionic")


def element_unitary(e, theta):
    return scipy.linalg.expm(theta * element_generator(e))


def fock_hamiltonian(ints):
    """Second-quantized operator assembled term by term from explicit matrices."""
    n = ints.n_spin_orbitals
    a = [fermion_annihilator(p, n) for p in range(n)]
    ad = [m.conj().T for m in a]
    h = ints.core_energy * np.eye(1 << n, dtype=complex)
    for (p, q), v in ints.one_body.items():
        h += v * ad[p] @ a[q]
    for (p, q, r, s), v in ints.two_body.items():
        h += v * ad[p] @ ad[q] @ a[r] @ a[s]
    return h


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def commutes(a, b, atol=1e-12):
    return np.allclose(a @ b, b @ a, atol=atol)
