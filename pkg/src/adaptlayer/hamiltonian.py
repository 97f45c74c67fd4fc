"""Molecular Hamiltonian ingestion, Jordan-Wigner mapping and exact reference energies."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from itertools import product

import numpy as np

from .errors import ParseError, ResourceError, ValidationError
from .pauli import PauliString, QubitHamiltonian, parse_pauli_hamiltonian

__all__ = [
    "FermionicIntegrals",
    "MoleculeSpec",
    "parse_fcidump",
    "jordan_wigner",
    "parse_pauli_hamiltonian",
    "serialize",
    "hartree_fock_state",
    "number_operator",
    "exact_ground_energy",
    "load_molecule",
    "available_molecules",
]

DENSE_LIMIT = 10
DEFAULT_QUBIT_CAP = 16
PRUNE_THRESHOLD = 1e-12


@dataclass
class FermionicIntegrals:
    """Spin-orbital integrals of ``H = sum h_pq a+_p a_q + sum h_pqrs a+_p a+_q a_r a_s``.

    Attributes:
        n_spin_orbitals: Number of spin orbitals (qubits after mapping).
        n_electrons: Electron count of the reference state.
        core_energy: Constant offset in Hartree.
        one_body: Mapping ``(p, q) -> h_pq``.
        two_body: Mapping ``(p, q, r, s) -> h_pqrs``.
    """

    n_spin_orbitals: int
    n_electrons: int
    core_energy: float = 0.0
    one_body: dict[tuple[int, int], float] = field(default_factory=dict)
    two_body: dict[tuple[int, int, int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_spin_orbitals
        if n < 1:
            raise ValidationError("need at least one spin orbital")
        if not 0 <= self.n_electrons <= n:
            raise ValidationError(f"{self.n_electrons} electrons do not fit in {n} spin orbitals")
        for key in list(self.one_body) + list(self.two_body):
            if any(not 0 <= i < n for i in key):
                raise ValidationError(f"integral index {key} outside [0, {n})")

    def validate_hermitian(self, atol: float = 1e-10) -> None:
        for (p, q), v in self.one_body.items():
            if abs(v - self.one_body.get((q, p), 0.0)) > atol:
                raise ValidationError(f"h[{p},{q}] != h[{q},{p}]")
        for (p, q, r, s), v in self.two_body.items():
            # (a+_p a+_q a_r a_s)^dagger = a+_s a+_r a_q a_p
            if abs(v - self.two_body.get((s, r, q, p), 0.0)) > atol:
                raise ValidationError(f"two-body term {(p, q, r, s)} has no Hermitian partner")


@dataclass(frozen=True)
class MoleculeSpec:
    name: str
    geometry: tuple[tuple[str, float, float, float], ...]
    n_spin_orbitals: int
    n_electrons: int

    def __post_init__(self):
        if not self.geometry:
            raise ValidationError("geometry must list at least one atom")
        if self.n_spin_orbitals % 2:
            raise ValidationError("spin-orbital count must be even")


def _header_int(header: str, key: str) -> int:
    m = re.search(rf"\b{key}\s*=\s*(-?\d+)", header, flags=re.I)
    if m is None:
        raise ParseError(f"FCIDUMP header lacks an integer {key}", 1)
    return int(m.group(1))


def parse_fcidump(text: str | bytes) -> FermionicIntegrals:
    """Read an FCIDUMP file (chemists' notation, 1-based spatial orbitals).

    Spatial orbital ``i`` (0-based) becomes spin orbitals ``2i`` (alpha) and
    ``2i+1`` (beta).  Two-electron records are expanded over the usual 8-fold
    permutational symmetry of real orbitals.

    Args:
        text: File contents.

    Returns:
        Spin-orbital integrals whose assembled operator is the molecular Hamiltonian.

    Raises:
        ParseError: Malformed header or data line.
        ValidationError: Orbital index beyond ``NORB``.
    """
    if isinstance(text, bytes):
        text = text.decode()
    lines = text.splitlines()
    header_lines = []
    end = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.upper().startswith("&END") or stripped == "/":
            end = i
            break
        header_lines.append(line)
        if stripped.upper().endswith("&END") or stripped.endswith("/"):
            header_lines[-1] = re.sub(r"(&END|/)\s*$", "", line, flags=re.I)
            end = i
            break
    if end is None or not header_lines or "&FCI" not in header_lines[0].upper():
        raise ParseError("missing &FCI ... &END header", 1)
    header = " ".join(header_lines)
    norb = _header_int(header, "NORB")
    nelec = _header_int(header, "NELEC")
    if norb < 1:
        raise ParseError("NORB must be positive", 1)

    core = 0.0
    h1 = np.zeros((norb, norb))
    eri = np.zeros((norb,) * 4)
    for lineno in range(end + 2, len(lines) + 1):
        raw = lines[lineno - 1].strip()
        if not raw:
            continue
        fields = raw.split()
        if len(fields) != 5:
            raise ParseError(f"expected 'value i j k l', got {raw!r}", lineno)
        try:
            val = float(fields[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(f) for f in fields[1:])
        except ValueError:
            raise ParseError(f"unreadable record {raw!r}", lineno) from None
        if any(x < 0 or x > norb for x in (i, j, k, l)):
            raise ValidationError(f"line {lineno}: orbital index exceeds NORB={norb}")
        if i == j == k == l == 0:
            core += val
        elif k == 0 and l == 0:
            if j == 0:
                continue  # orbital energy record, not part of the Hamiltonian
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = val
        elif i and j and k and l:
            a, b, c, d = i - 1, j - 1, k - 1, l - 1
            for p, q, r, s in (
                (a, b, c, d), (b, a, c, d), (a, b, d, c), (b, a, d, c),
                (c, d, a, b), (d, c, a, b), (c, d, b, a), (d, c, b, a),
            ):
                eri[p, q, r, s] = val
        else:
            raise ParseError(f"record {raw!r} has an unsupported index pattern", lineno)
    return integrals_from_spatial(h1, eri, core, nelec)


def integrals_from_spatial(h1: np.ndarray, eri: np.ndarray, core: float, n_electrons: int) -> FermionicIntegrals:
    """Expand spatial integrals (chemists' ``(pq|rs)``) to interleaved spin orbitals."""
    norb = h1.shape[0]
    n = 2 * norb
    one: dict[tuple[int, int], float] = {}
    for i, j in product(range(norb), repeat=2):
        if h1[i, j] != 0.0:
            for s in (0, 1):
                one[(2 * i + s, 2 * j + s)] = float(h1[i, j])
    two: dict[tuple[int, int, int, int], float] = {}
    # a+_P a+_Q a_R a_S carries (PS|QR)/2 with spin(P)=spin(S), spin(Q)=spin(R)
    for i, j, k, l in product(range(norb), repeat=4):
        v = eri[i, l, j, k]
        if v == 0.0:
            continue
        for s1, s2 in product((0, 1), repeat=2):
            P, Q, R, S = 2 * i + s1, 2 * j + s2, 2 * k + s2, 2 * l + s1
            if P == Q or R == S:
                continue
            two[(P, Q, R, S)] = 0.5 * float(v)
    return FermionicIntegrals(n, n_electrons, float(core), one, two)


# --- Jordan-Wigner ---------------------------------------------------------

_PauliDict = dict[tuple[int, int], complex]
_IP = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


def _mul(a: _PauliDict, b: _PauliDict) -> _PauliDict:
    out: _PauliDict = {}
    for (x1, z1), c1 in a.items():
        ny1 = (x1 & z1).bit_count()
        for (x2, z2), c2 in b.items():
            x, z = x1 ^ x2, z1 ^ z2
            k = ny1 + (x2 & z2).bit_count() - (x & z).bit_count() + 2 * (z1 & x2).bit_count()
            key = (x, z)
            out[key] = out.get(key, 0) + c1 * c2 * _IP[k % 4]
    return out


def _ladder_op(p: int, dagger: bool) -> _PauliDict:
    """JW image of a_p (or a+_p) as {(xmask, zmask): coefficient of the phase-free string}."""
    chain = (1 << p) - 1
    bit = 1 << p
    # Phase-free Y string (x=z=1) stands for Y itself here, so the dictionary
    # value multiplies the true Y operator; iY/2 in a_p, -iY/2 in a+_p.
    return {(bit, chain): 0.5, (bit, chain | bit): (-0.5j if dagger else 0.5j)}


def jordan_wigner(ints: FermionicIntegrals, prune: float = PRUNE_THRESHOLD) -> QubitHamiltonian:
    """Map fermionic integrals to a real-weighted Pauli sum.

    ``a_p -> Q_p Z_0 ... Z_{p-1}`` with ``Q = (X + iY)/2`` so that qubit value 1
    means the spin orbital is occupied.  The core energy lands on the identity.
    """
    n = ints.n_spin_orbitals
    # The dictionaries below are keyed by (xmask, zmask) where the pair denotes
    # the Hermitian string with Y = XZ-bits-both-set, matching PauliString.
    # Products therefore use the i^(...) phase rule from ``pauli.multiply``.
    ann = [_ladder_op(p, False) for p in range(n)]
    cre = [_ladder_op(p, True) for p in range(n)]
    total: _PauliDict = {(0, 0): complex(ints.core_energy)}

    def add(op: _PauliDict, coef: float) -> None:
        for key, c in op.items():
            total[key] = total.get(key, 0) + coef * c

    for (p, q), v in ints.one_body.items():
        if v:
            add(_mul(cre[p], ann[q]), v)
    if ints.two_body:
        cc: dict[tuple[int, int], _PauliDict] = {}
        aa: dict[tuple[int, int], _PauliDict] = {}
        for (p, q, r, s), v in ints.two_body.items():
            if not v or p == q or r == s:
                continue
            if (p, q) not in cc:
                cc[(p, q)] = _mul(cre[p], cre[q])
            if (r, s) not in aa:
                aa[(r, s)] = _mul(ann[r], ann[s])
            add(_mul(cc[(p, q)], aa[(r, s)]), v)

    terms: dict[PauliString, float] = {}
    for (x, z), c in total.items():
        if abs(c) <= prune:
            continue
        if abs(c.imag) > 1e-10:
            raise ValidationError(f"non-Hermitian integrals: imaginary weight {c.imag:.3e}")
        terms[PauliString(n, x, z)] = c.real
    return QubitHamiltonian(n, terms)


def serialize(h: QubitHamiltonian) -> str:
    """Pauli-sum text accepted by :func:`parse_pauli_hamiltonian`."""
    return h.to_text()


def number_operator(n_qubits: int) -> QubitHamiltonian:
    terms = {PauliString.identity(n_qubits): n_qubits / 2}
    for p in range(n_qubits):
        terms[PauliString(n_qubits, 0, 1 << p)] = -0.5
    return QubitHamiltonian(n_qubits, terms)


def hartree_fock_state(n_qubits: int, n_electrons: int) -> np.ndarray:
    """Basis state with the ``n_electrons`` lowest spin orbitals occupied."""
    if n_qubits < 0 or not 0 <= n_electrons <= n_qubits:
        raise ValidationError(f"cannot place {n_electrons} electrons in {n_qubits} spin orbitals")
    psi = np.zeros(1 << n_qubits, dtype=np.complex128)
    psi[(1 << n_electrons) - 1] = 1.0
    return psi


def _sector_indices(n: int, n_electrons: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    return idx[np.bitwise_count(idx) == n_electrons]


def exact_ground_energy(h: QubitHamiltonian, n_electrons: int | None = None, cap: int = DEFAULT_QUBIT_CAP) -> float:
    """Smallest eigenvalue of ``h``, optionally within a fixed particle-number sector.

    Dense diagonalization is used up to ``DENSE_LIMIT`` qubits and Lanczos
    (ARPACK through scipy) on the Pauli action above that.

    Args:
        h: Qubit Hamiltonian.
        n_electrons: If given, restrict to basis states with this Hamming weight.
            Only meaningful for number-conserving Hamiltonians.
        cap: Largest qubit count accepted.

    Raises:
        ResourceError: ``h.n_qubits`` exceeds ``cap``.
    """
    n = h.n_qubits
    if n > cap:
        raise ResourceError(f"{n} qubits exceeds the exact-diagonalization cap of {cap}")
    import scipy.linalg
    import scipy.sparse.linalg as spla

    if n_electrons is not None:
        sel = _sector_indices(n, n_electrons)
        if sel.size == 0:
            raise ValidationError(f"no basis states with {n_electrons} particles")
        mat = h.to_sparse().tocsr()[sel][:, sel]
        if sel.size <= 1 << DENSE_LIMIT or sel.size < 64:
            return float(scipy.linalg.eigvalsh(mat.toarray())[0])
        vals = spla.eigsh(mat, k=1, which="SA", tol=1e-12, return_eigenvectors=False)
        return float(vals[0])
    if n <= DENSE_LIMIT:
        return float(scipy.linalg.eigvalsh(h.to_matrix())[0])
    dim = 1 << n
    op = spla.LinearOperator((dim, dim), matvec=lambda v: h.apply(np.ravel(v)), dtype=np.complex128)
    vals = spla.eigsh(op, k=1, which="SA", tol=1e-12, return_eigenvectors=False)
    return float(vals[0])


# --- bundled molecules -----------------------------------------------------


def _data_text(name: str) -> str:
    return resources.files("adaptlayer").joinpath("data", name).read_text()


def available_molecules() -> list[str]:
    return sorted(json.loads(_data_text("molecules.json")))


def load_molecule(name: str) -> tuple[MoleculeSpec, FermionicIntegrals, dict]:
    """Load a bundled STO-3G molecule.

    Returns:
        ``(spec, integrals, refs)`` where ``refs`` holds externally computed
        ``reference_hf_energy`` and ``reference_fci_energy``.
    """
    table = json.loads(_data_text("molecules.json"))
    if name not in table:
        raise ValidationError(f"unknown molecule {name!r}; known: {sorted(table)}")
    meta = table[name]
    spec = MoleculeSpec(
        meta["name"],
        tuple((a, float(x), float(y), float(z)) for a, x, y, z in meta["geometry"]),
        meta["n_spin_orbitals"],
        meta["n_electrons"],
    )
    ints = parse_fcidump(_data_text(meta["fcidump"]))
    refs = {k: meta[k] for k in ("reference_hf_energy", "reference_fci_energy")}
    return spec, ints, refs
