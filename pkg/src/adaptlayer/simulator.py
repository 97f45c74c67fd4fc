"""Exact statevector and density-matrix simulation of ansatz circuits and noise channels.

States are plain numpy arrays: a statevector is 1-D of length ``2**N`` and a
density matrix is a square 2-D array.  Qubit 0 is the least significant bit
of the basis index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .pauli import QubitHamiltonian, expectation
from .pools import AnsatzElement

__all__ = [
    "AnsatzCircuit",
    "apply_element",
    "run_circuit",
    "energy_landscape",
    "gradient_loss",
    "gradient_losses",
    "energy_gradient",
    "energy_and_gradient",
    "AmplitudeDamping",
    "Dephasing",
    "Depolarizing",
    "PauliMap",
    "DampingDerivative",
    "apply_channel",
    "apply_single_qubit_operator",
    "check_density_matrix",
]


def _n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValidationError(f"state dimension {dim} is not a power of two")
    return n


def _check_element(e: AnsatzElement, n: int) -> None:
    if e.n_qubits != n:
        raise ValidationError(f"element on {e.n_qubits} qubits applied to a {n}-qubit state")


def apply_element(e: AnsatzElement, theta: float, state: np.ndarray) -> np.ndarray:
    """Return ``exp(theta*T) state`` (or ``U rho U^dagger`` for a density matrix)."""
    state = np.array(state, dtype=np.complex128, order="C")
    n = _n_qubits_of(state)
    _check_element(e, n)
    if state.ndim == 2 and state.shape[0] == state.shape[1] and state.shape[0] > 1:
        return _conjugate_density(e, theta, state)
    _rotate_inplace(e, theta, state)
    return state


def _rotate_inplace(e: AnsatzElement, theta: float, state: np.ndarray) -> None:
    src, dst, sign = e.pair_map
    kernels.rotate_pairs(state, src, dst, sign, theta)


def _conjugate_density(e: AnsatzElement, theta: float, rho: np.ndarray) -> np.ndarray:
    _rotate_inplace(e, theta, rho)  # U rho
    out = np.ascontiguousarray(rho.conj().T)  # rho U^dagger
    _rotate_inplace(e, theta, out)  # U rho U^dagger
    return out


@dataclass
class AnsatzCircuit:
    """Ordered parameterized elements; ``provenance[k]`` is the iteration that added element ``k``."""

    elements: list[AnsatzElement] = field(default_factory=list)
    parameters: list[float] = field(default_factory=list)
    provenance: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.elements) != len(self.parameters):
            raise ValidationError("one parameter per element is required")
        if not self.provenance:
            self.provenance = [0] * len(self.elements)
        if len(self.provenance) != len(self.elements):
            raise ValidationError("provenance must list one iteration per element")

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def n_parameters(self) -> int:
        return len(self.parameters)

    def append(self, e: AnsatzElement, theta: float = 0.0, iteration: int = 0) -> None:
        self.elements.append(e)
        self.parameters.append(float(theta))
        self.provenance.append(iteration)

    def extended(self, new: Sequence[AnsatzElement], iteration: int = 0) -> AnsatzCircuit:
        return AnsatzCircuit(
            list(self.elements) + list(new),
            list(self.parameters) + [0.0] * len(new),
            list(self.provenance) + [iteration] * len(new),
        )

    def with_parameters(self, params: Iterable[float]) -> AnsatzCircuit:
        params = [float(x) for x in params]
        return AnsatzCircuit(list(self.elements), params, list(self.provenance))

    def copy(self) -> AnsatzCircuit:
        return self.with_parameters(self.parameters)


def run_circuit(circuit: AnsatzCircuit, state: np.ndarray, params: Sequence[float] | None = None) -> np.ndarray:
    """Apply the circuit's elements left to right to a statevector or density matrix."""
    params = circuit.parameters if params is None else params
    if len(params) != len(circuit.elements):
        raise ValidationError("parameter vector length does not match the circuit")
    out = np.array(state, dtype=np.complex128, order="C")
    n = _n_qubits_of(out)
    is_density = out.ndim == 2
    for e, th in zip(circuit.elements, params):
        _check_element(e, n)
        if is_density:
            out = _conjugate_density(e, th, out)
        else:
            _rotate_inplace(e, th, out)
    return out


def energy_landscape(h: QubitHamiltonian, circuit: AnsatzCircuit, state: np.ndarray, params=None) -> float:
    """Energy of the circuit output for a statevector or density-matrix input."""
    out = run_circuit(circuit, state, params)
    if out.ndim == 2:
        return float(np.real(np.trace(h.to_sparse() @ out)))
    return expectation(h, out)


def gradient_loss(h: QubitHamiltonian, state: np.ndarray, e: AnsatzElement, hpsi: np.ndarray | None = None) -> float:
    """``-|2 Re <H psi|T psi>|``, the slope magnitude of appending ``e`` at zero angle."""
    state = np.ascontiguousarray(state, dtype=np.complex128)
    if hpsi is None:
        hpsi = h.apply(state)
    src, dst, sign = e.pair_map
    return -abs(2.0 * kernels.generator_overlap(hpsi, state, src, dst, sign).real)


def gradient_losses(h: QubitHamiltonian, state: np.ndarray, elements: Iterable[AnsatzElement]) -> np.ndarray:
    """Vector of :func:`gradient_loss` values sharing a single ``H psi``."""
    state = np.ascontiguousarray(state, dtype=np.complex128)
    hpsi = h.apply(state)
    return np.array([gradient_loss(h, state, e, hpsi) for e in elements])


def energy_and_gradient(
    h: QubitHamiltonian, circuit: AnsatzCircuit, state: np.ndarray, params: Sequence[float] | None = None
) -> tuple[float, np.ndarray]:
    """Energy and its parameter gradient by one forward and one backward sweep."""
    params = np.asarray(circuit.parameters if params is None else params, dtype=float)
    psi = run_circuit(circuit, state, params)
    if psi.ndim != 1:
        raise ValidationError("gradients are computed for statevector inputs")
    lam = h.apply(psi)
    energy = float(np.vdot(psi, lam).real)
    grad = np.zeros(len(params))
    pair = np.empty((psi.shape[0], 2), dtype=np.complex128)
    pair[:, 0] = psi
    pair[:, 1] = lam
    for k in range(len(params) - 1, -1, -1):
        src, dst, sign = circuit.elements[k].pair_map
        grad[k] = 2.0 * kernels.generator_overlap(
            np.ascontiguousarray(pair[:, 1]), np.ascontiguousarray(pair[:, 0]), src, dst, sign
        ).real
        kernels.rotate_pairs(pair, src, dst, sign, -params[k])
    return energy, grad


def energy_gradient(h: QubitHamiltonian, circuit: AnsatzCircuit, state: np.ndarray, params=None) -> np.ndarray:
    return energy_and_gradient(h, circuit, state, params)[1]


# --- channels ----------------------------------------------------------------

_PAULI_2x2 = {
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class AmplitudeDamping:
    gamma: float
    qubit: int

    def __post_init__(self):
        _check_probability("gamma", self.gamma)

    def branches(self):
        g = self.gamma
        k0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=np.complex128)
        k1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=np.complex128)
        return [(1.0, k0), (1.0, k1)]


@dataclass(frozen=True)
class Dephasing:
    p: float
    qubit: int

    def __post_init__(self):
        _check_probability("p_z", self.p)

    def branches(self):
        return [(1.0 - self.p, np.eye(2, dtype=np.complex128)), (self.p, _PAULI_2x2["Z"])]


@dataclass(frozen=True)
class Depolarizing:
    """``(1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)``."""

    p: float
    qubit: int

    def __post_init__(self):
        _check_probability("p", self.p)

    def branches(self):
        third = self.p / 3.0
        return [(1.0 - self.p, np.eye(2, dtype=np.complex128))] + [(third, _PAULI_2x2[s]) for s in "XYZ"]


@dataclass(frozen=True)
class PauliMap:
    letter: str
    qubit: int

    def __post_init__(self):
        if self.letter not in _PAULI_2x2:
            raise ValidationError(f"unknown Pauli letter {self.letter!r}")

    def branches(self):
        return [(1.0, _PAULI_2x2[self.letter])]


@dataclass(frozen=True)
class DampingDerivative:
    """Derivative map of amplitude damping: damping at gamma=3/4 plus a quarter of a signed remainder.

    Trace preserving but not completely positive; ``map - identity`` is the
    derivative of the damping channel at ``gamma = 0``.
    """

    qubit: int

    def branches(self):
        return [
            (1.0, np.array([[1, 0], [0, 0.5]], dtype=np.complex128)),
            (1.0, np.array([[0, np.sqrt(0.75)], [0, 0]], dtype=np.complex128)),
            (0.25, np.array([[0, 1], [0, 0]], dtype=np.complex128)),
            (-0.25, np.array([[0, 0], [0, 1]], dtype=np.complex128)),
        ]


Channel = AmplitudeDamping | Dephasing | Depolarizing | PauliMap | DampingDerivative


def _split(n: int, r: int) -> tuple[int, int]:
    if not 0 <= r < n:
        raise ValidationError(f"qubit {r} out of range for {n} qubits")
    return 1 << (n - r - 1), 1 << r


def apply_single_qubit_operator(op: np.ndarray, qubit: int, state: np.ndarray) -> np.ndarray:
    """``op`` acting on ``qubit`` of a statevector."""
    n = _n_qubits_of(state)
    hi, lo = _split(n, qubit)
    v = np.asarray(state, dtype=np.complex128).reshape(hi, 2, lo)
    return np.einsum("ik,akb->aib", op, v).reshape(-1)


def apply_channel(channel: Channel, rho: np.ndarray) -> np.ndarray:
    """Apply a single-qubit linear map to a density matrix."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError("channels act on square density matrices")
    n = _n_qubits_of(rho)
    hi, lo = _split(n, channel.qubit)
    r6 = rho.reshape(hi, 2, lo, hi, 2, lo)
    out = np.zeros_like(r6)
    for w, k in channel.branches():
        out += w * np.einsum("ik,akbcld,jl->aibcjd", k, r6, k.conj(), optimize=True)
    return out.reshape(rho.shape)


def check_density_matrix(rho: np.ndarray, atol: float = 1e-9) -> None:
    """Raise unless ``rho`` is Hermitian, unit trace and positive semidefinite within ``atol``."""
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise ValidationError(f"density matrix trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(rho)[0] < -atol:
        raise ValidationError("density matrix has a negative eigenvalue")
