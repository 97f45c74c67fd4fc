"""Noisy layer-by-layer simulation and first-order noise susceptibilities.

Three noise models are supported, each with its own noise parameter ``alpha``:

* ``damping``: amplitude damping on every qubit after each layer with
  ``gamma = 1 - exp(-alpha * tau_l)``; ``alpha = omega_1 = 1/T1``.
* ``dephasing``: dephasing on every qubit after each layer with
  ``p_z = (1 - exp(-alpha * tau_l)) / 2``; ``alpha = omega_z``.
* ``depolarizing``: single-qubit depolarizing with probability ``alpha = p``
  applied ``M[l, r]`` times to qubit ``r`` after layer ``l``.

Susceptibilities are the derivatives ``dE/dalpha`` at ``alpha = 0``; they are
assembled from statevector runs with one map inserted at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceError, ValidationError
from .layout import GateSchedule, Layer, LayerTiming, cnot_accounting, decompose_into_layers
from .pauli import QubitHamiltonian, expectation
from .pools import SUPPORT
from .simulator import (
    AmplitudeDamping,
    AnsatzCircuit,
    DampingDerivative,
    Dephasing,
    Depolarizing,
    PauliMap,
    apply_channel,
    apply_element,
    apply_single_qubit_operator,
)

MODELS = ("damping", "dephasing", "depolarizing")
DENSITY_CAP = 10


@dataclass(frozen=True)
class NoiseSpec:
    """Physical noise rates.

    Attributes:
        omega1: Amplitude-damping rate ``1/T1`` in 1/s.
        omegaz: Pure-dephasing rate in 1/s.
        p: Depolarizing probability per CNOT target.
    """

    omega1: float = 0.0
    omegaz: float = 0.0
    p: float = 0.0

    def __post_init__(self):
        if min(self.omega1, self.omegaz, self.p) < 0:
            raise ValidationError("noise rates must be non-negative")
        if self.p > 1:
            raise ValidationError("depolarizing probability must not exceed 1")

    @classmethod
    def from_coherence_times(cls, t1: float, t2star: float, p: float = 0.0, doubled_dephasing: bool = False) -> NoiseSpec:
        """Rates from ``T1`` and ``T2*`` (seconds).

        The default pure-dephasing rate is ``1/T2* - 1/(2 T1)``;
        ``doubled_dephasing`` selects ``2/T2* - 1/T1`` instead.
        """
        if t1 <= 0 or t2star <= 0:
            raise ValidationError("coherence times must be positive")
        wz = 2.0 / t2star - 1.0 / t1 if doubled_dephasing else 1.0 / t2star - 0.5 / t1
        if wz < 0:
            raise ValidationError("T2* exceeds the T1 limit; dephasing rate would be negative")
        return cls(1.0 / t1, wz, p)

    def alpha(self, model: str) -> float:
        _check_model(model)
        return {"damping": self.omega1, "dephasing": self.omegaz, "depolarizing": self.p}[model]


def _check_model(model: str) -> None:
    if model not in MODELS:
        raise ValidationError(f"unknown noise model {model!r}; expected one of {MODELS}")


def damping_gamma(omega1: float, tau: float) -> float:
    return -math.expm1(-omega1 * tau)


def dephasing_probability(omegaz: float, tau: float) -> float:
    return -0.5 * math.expm1(-omegaz * tau)


@dataclass
class LayeredCircuit:
    """A circuit with its support layering and per-layer timing."""

    circuit: AnsatzCircuit
    layers: list[Layer]
    timing: LayerTiming
    n_qubits: int

    @classmethod
    def build(cls, circuit: AnsatzCircuit, n_qubits: int, schedule: GateSchedule | None = None) -> LayeredCircuit:
        layers = decompose_into_layers(circuit, SUPPORT)
        timing = cnot_accounting(circuit, schedule, layers=layers, n_qubits=n_qubits)
        return cls(circuit, layers, timing, n_qubits)

    @property
    def n_layers(self) -> int:
        return len(self.layers)


def _apply_layer(layer: Layer, state: np.ndarray) -> np.ndarray:
    for e, th in zip(layer.elements, layer.parameters):
        state = apply_element(e, th, state)
    return state


def noisy_density_run(
    h: QubitHamiltonian,
    lc: LayeredCircuit,
    psi0: np.ndarray,
    model: str,
    alpha: float,
    cap: int = DENSITY_CAP,
) -> tuple[np.ndarray, float]:
    """Density-matrix run with the model's noise layer after every circuit layer.

    Returns:
        The output density matrix and ``Tr[H rho]``.

    Raises:
        ResourceError: More qubits than ``cap``.
    """
    _check_model(model)
    n = lc.n_qubits
    if n > cap:
        raise ResourceError(f"density-matrix simulation capped at {cap} qubits (got {n})")
    if alpha < 0:
        raise ValidationError("noise parameter must be non-negative")
    psi0 = np.asarray(psi0, dtype=np.complex128)
    rho = np.outer(psi0, psi0.conj())
    for l, layer in enumerate(lc.layers):
        rho = _apply_layer(layer, rho)
        tau = float(lc.timing.durations[l])
        for r in range(n):
            if model == "damping":
                rho = apply_channel(AmplitudeDamping(damping_gamma(alpha, tau), r), rho)
            elif model == "dephasing":
                rho = apply_channel(Dephasing(dephasing_probability(alpha, tau), r), rho)
            else:
                for _ in range(int(lc.timing.cnot_targets[l, r])):
                    rho = apply_channel(Depolarizing(alpha, r), rho)
    energy = float(np.real(np.sum(h.to_sparse().multiply(rho.T))))
    return rho, energy


class _Perturber:
    """Prefix states after each layer; suffix replays for inserted maps."""

    def __init__(self, h: QubitHamiltonian, lc: LayeredCircuit, psi0: np.ndarray):
        self.h = h
        self.lc = lc
        state = np.array(psi0, dtype=np.complex128)
        self.prefix = []
        for layer in lc.layers:
            state = _apply_layer(layer, state)
            self.prefix.append(state)
        self.energy = expectation(h, state)

    def expectation_after(self, branches, r: int, l: int) -> float:
        """Energy with the map given by weighted ``branches`` inserted on qubit ``r`` after layer ``l`` (0-based)."""
        total = 0.0
        for w, k in branches:
            phi = apply_single_qubit_operator(k, r, self.prefix[l])
            for layer in self.lc.layers[l + 1 :]:
                phi = _apply_layer(layer, phi)
            total += w * float(np.vdot(phi, self.h.apply(phi)).real)
        return total


def perturbed_expectation(
    h: QubitHamiltonian, lc: LayeredCircuit, psi0: np.ndarray, map_name: str, r: int, l: int
) -> float:
    """Energy with one map inserted on qubit ``r`` after layer ``l`` (0-based).

    ``map_name`` is ``dF`` (damping derivative map) or a Pauli letter.
    """
    if not 0 <= r < lc.n_qubits:
        raise ValidationError(f"qubit {r} out of range")
    if not 0 <= l < lc.n_layers:
        raise ValidationError(f"layer {l} out of range")
    return _Perturber(h, lc, psi0).expectation_after(_map_branches(map_name, r), r, l)


def _map_branches(map_name: str, r: int):
    if map_name == "dF":
        return DampingDerivative(r).branches()
    return PauliMap(map_name, r).branches()


@dataclass
class SusceptibilityResult:
    """Susceptibilities with the fluctuation tables they are built from.

    ``fluct_F[l, r]`` and ``fluct_Z[l, r]`` are energy shifts from inserting the
    damping-derivative map or ``Z`` on qubit ``r`` after layer ``l``;
    ``fluct_P[l, r, k]`` is the shift for Pauli ``XYZ[k]``.
    """

    chi_F: float
    chi_C: float
    chi_D: float
    fluct_F: np.ndarray
    fluct_Z: np.ndarray
    fluct_P: np.ndarray
    durations: np.ndarray
    cnot_targets: np.ndarray
    n_layers: int
    n_qubits: int
    n_cnot: int
    energy: float
    avg_F: float = field(init=False)
    avg_C: float = field(init=False)
    avg_D: float = field(init=False)

    def __post_init__(self):
        ln = self.n_layers * self.n_qubits
        self.avg_F = float(np.sum(self.durations[:, None] * self.fluct_F) / ln) if ln else 0.0
        self.avg_C = float(np.sum(0.5 * self.durations[:, None] * self.fluct_Z) / ln) if ln else 0.0
        dep = np.sum(self.cnot_targets[:, :, None] * self.fluct_P) / 3.0
        self.avg_D = float(dep / self.n_cnot) if self.n_cnot else 0.0

    def identity_residuals(self) -> tuple[float, float, float]:
        """``chi - product`` for the three average-fluctuation identities."""
        ln = self.n_layers * self.n_qubits
        return (
            self.chi_F - ln * self.avg_F,
            self.chi_C - ln * self.avg_C,
            self.chi_D - self.n_cnot * self.avg_D,
        )

    def chi(self, model: str) -> float:
        _check_model(model)
        return {"damping": self.chi_F, "dephasing": self.chi_C, "depolarizing": self.chi_D}[model]

    def to_dict(self) -> dict:
        return {
            "chi_F": self.chi_F,
            "chi_C": self.chi_C,
            "chi_D": self.chi_D,
            "avg_F": self.avg_F,
            "avg_C": self.avg_C,
            "avg_D": self.avg_D,
            "n_layers": self.n_layers,
            "n_qubits": self.n_qubits,
            "n_cnot": self.n_cnot,
            "energy": self.energy,
        }


def susceptibility(h: QubitHamiltonian, lc: LayeredCircuit, psi0: np.ndarray) -> SusceptibilityResult:
    """All three susceptibilities from one sweep of prefix states."""
    pert = _Perturber(h, lc, psi0)
    L, n = lc.n_layers, lc.n_qubits
    e0 = pert.energy
    fF = np.zeros((L, n))
    fZ = np.zeros((L, n))
    fP = np.zeros((L, n, 3))
    M = lc.timing.cnot_targets
    for l in range(L):
        for r in range(n):
            fF[l, r] = pert.expectation_after(DampingDerivative(r).branches(), r, l) - e0
            fZ[l, r] = pert.expectation_after(PauliMap("Z", r).branches(), r, l) - e0
            fP[l, r, 2] = fZ[l, r]
            for k, s in enumerate("XY"):
                fP[l, r, k] = pert.expectation_after(PauliMap(s, r).branches(), r, l) - e0
    tau = np.asarray(lc.timing.durations, dtype=float)
    chi_F = float(np.sum(tau[:, None] * fF))
    chi_C = float(np.sum(0.5 * tau[:, None] * fZ))
    chi_D = float(np.sum(M[:, :, None] * fP) / 3.0)
    return SusceptibilityResult(chi_F, chi_C, chi_D, fF, fZ, fP, tau, M, L, n, lc.timing.n_cnot, e0)


def finite_difference(
    h: QubitHamiltonian, lc: LayeredCircuit, psi0: np.ndarray, model: str, alpha: float = 1e-6
) -> float:
    """Forward difference ``(E(alpha) - E(0)) / alpha`` from density-matrix runs."""
    e0 = noisy_density_run(h, lc, psi0, model, 0.0)[1]
    ea = noisy_density_run(h, lc, psi0, model, alpha)[1]
    return (ea - e0) / alpha


@dataclass(frozen=True)
class FidelityRequirements:
    t1_min: float
    t2star_min: float
    p_max: float

    def to_dict(self) -> dict:
        return {"T1_min_s": self.t1_min, "T2star_min_s": self.t2star_min, "p_max": self.p_max}


def fidelity_requirements(chi_F: float, chi_C: float, chi_D: float, target: float = 1e-3) -> FidelityRequirements:
    """Coherence times and gate error keeping each first-order error below ``target`` (Ha)."""
    if target <= 0:
        raise ValidationError("target accuracy must be positive")
    chi_D = abs(chi_D)
    return FidelityRequirements(abs(chi_F) / target, abs(chi_C) / target, math.inf if chi_D == 0 else target / chi_D)
