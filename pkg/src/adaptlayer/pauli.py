"""Pauli strings, qubit Hamiltonians and their action on statevectors.

A Pauli string is stored phase-free as a pair of bit masks ``(xmask, zmask)``;
qubit ``q`` carries X if only the x bit is set, Z if only the z bit is set
and Y if both are.  Qubit 0 is the least significant bit of an amplitude
index, so ``P|b>`` for basis index ``b`` is

    i**n_Y * (-1)**popcount(b & zmask) * |b ^ xmask>.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import kernels
from .errors import NumericalError, ParseError, ValidationError

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_I_POWERS = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


@dataclass(frozen=True, order=True)
class PauliString:
    n_qubits: int
    xmask: int
    zmask: int

    def __post_init__(self):
        limit = 1 << self.n_qubits
        if self.xmask < 0 or self.zmask < 0 or self.xmask >= limit or self.zmask >= limit:
            raise ValidationError(f"Pauli masks exceed {self.n_qubits} qubits")

    @classmethod
    def identity(cls, n_qubits: int) -> PauliString:
        return cls(n_qubits, 0, 0)

    @classmethod
    def from_ops(cls, ops: Iterable[tuple[int, str]], n_qubits: int) -> PauliString:
        """Build from ``[(qubit, letter), ...]``; repeated qubits are rejected."""
        x = z = 0
        seen = set()
        for q, letter in ops:
            if letter not in _LETTER_BITS:
                raise ValidationError(f"unknown Pauli letter {letter!r}")
            if q < 0 or q >= n_qubits:
                raise ValidationError(f"qubit {q} out of range for {n_qubits} qubits")
            if q in seen:
                raise ValidationError(f"qubit {q} appears twice")
            seen.add(q)
            bx, bz = _LETTER_BITS[letter]
            x |= bx << q
            z |= bz << q
        return cls(n_qubits, x, z)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Dense label, qubit 0 first: ``"XZIY"`` is X0 Z1 Y3."""
        return cls.from_ops(
            [(q, ch) for q, ch in enumerate(label) if ch != "I"], len(label)
        )

    def letter(self, q: int) -> str:
        bx = (self.xmask >> q) & 1
        bz = (self.zmask >> q) & 1
        return "IZXY"[2 * bx + bz]

    @property
    def support(self) -> frozenset[int]:
        m = self.xmask | self.zmask
        return frozenset(q for q in range(self.n_qubits) if (m >> q) & 1)

    @property
    def n_y(self) -> int:
        return (self.xmask & self.zmask).bit_count()

    @property
    def weight(self) -> int:
        return (self.xmask | self.zmask).bit_count()

    def ops(self) -> list[tuple[int, str]]:
        return [(q, self.letter(q)) for q in sorted(self.support)]

    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n_qubits))

    def __str__(self) -> str:
        return " ".join(f"{p}{q}" for q, p in self.ops()) or "I"

    def to_matrix(self) -> np.ndarray:
        """Dense 2^N x 2^N matrix (qubit 0 least significant)."""
        dim = 1 << self.n_qubits
        idx = np.arange(dim, dtype=np.int64)
        sgn = 1.0 - 2.0 * (np.bitwise_count(idx & self.zmask) & 1)
        mat = np.zeros((dim, dim), dtype=np.complex128)
        mat[idx ^ self.xmask, idx] = _I_POWERS[self.n_y % 4] * sgn
        return mat


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, c)`` with ``a @ b == phase * c``."""
    if a.n_qubits != b.n_qubits:
        raise ValidationError("Pauli strings act on different qubit counts")
    x = a.xmask ^ b.xmask
    z = a.zmask ^ b.zmask
    k = a.n_y + b.n_y - (x & z).bit_count() + 2 * (a.zmask & b.xmask).bit_count()
    return _I_POWERS[k % 4], PauliString(a.n_qubits, x, z)


def pauli_strings_commute(a: PauliString, b: PauliString) -> bool:
    """True iff the strings differ in an even number of places within their mutual support."""
    if a.n_qubits != b.n_qubits:
        raise ValidationError("Pauli strings act on different qubit counts")
    return ((a.xmask & b.zmask).bit_count() + (a.zmask & b.xmask).bit_count()) % 2 == 0


def apply_pauli_string(p: PauliString, state: np.ndarray) -> np.ndarray:
    state = np.ascontiguousarray(state, dtype=np.complex128)
    if state.shape[0] != 1 << p.n_qubits:
        raise ValidationError(
            f"state of length {state.shape[0]} does not match {p.n_qubits} qubits"
        )
    idx = np.arange(state.shape[0], dtype=np.int64)
    sgn = 1.0 - 2.0 * (np.bitwise_count(idx & p.zmask) & 1)
    if state.ndim == 2:
        sgn = sgn[:, None]
    return _I_POWERS[p.n_y % 4] * (sgn * state)[idx ^ p.xmask]


class QubitHamiltonian:
    """Real-weighted sum of distinct Pauli strings on ``n_qubits`` qubits.

    The identity offset is an ordinary term.  Instances are immutable once
    built; duplicate strings passed to the constructor are merged.
    """

    def __init__(self, n_qubits: int, terms: Mapping[PauliString, float] | Iterable[tuple[float, PauliString]] = ()):
        self.n_qubits = int(n_qubits)
        merged: dict[PauliString, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else ((p, c) for c, p in terms)
        for p, c in items:
            if p.n_qubits != self.n_qubits:
                raise ValidationError("term acts on a different number of qubits")
            if isinstance(c, complex) or np.iscomplexobj(c):
                if abs(np.imag(c)) > 1e-12:
                    raise ValidationError(f"non-real coefficient {c} for {p}")
                c = np.real(c)
            merged[p] = merged.get(p, 0.0) + float(c)
        self._terms = dict(sorted(merged.items()))

    @property
    def terms(self) -> dict[PauliString, float]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[PauliString, float]]:
        return iter(self._terms.items())

    def __eq__(self, other) -> bool:
        if not isinstance(other, QubitHamiltonian):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self._terms == other._terms

    def isclose(self, other: QubitHamiltonian, atol: float = 1e-12) -> bool:
        if self.n_qubits != other.n_qubits:
            return False
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) <= atol for k in keys)

    def pruned(self, threshold: float = 1e-12) -> QubitHamiltonian:
        return QubitHamiltonian(self.n_qubits, {p: c for p, c in self._terms.items() if abs(c) > threshold})

    def __add__(self, other: QubitHamiltonian) -> QubitHamiltonian:
        merged = dict(self._terms)
        for p, c in other._terms.items():
            merged[p] = merged.get(p, 0.0) + c
        return QubitHamiltonian(self.n_qubits, merged)

    def __mul__(self, scalar: float) -> QubitHamiltonian:
        return QubitHamiltonian(self.n_qubits, {p: c * scalar for p, c in self._terms.items()})

    __rmul__ = __mul__

    @cached_property
    def _arrays(self):
        ps = list(self._terms)
        xm = np.array([p.xmask for p in ps], dtype=np.int64)
        zm = np.array([p.zmask for p in ps], dtype=np.int64)
        phase = np.array([_I_POWERS[p.n_y % 4] for p in ps], dtype=np.complex128)
        coef = np.array([self._terms[p] for p in ps], dtype=np.float64)
        return xm, zm, phase, coef

    def apply(self, state: np.ndarray) -> np.ndarray:
        """Return H|state>."""
        state = _check_state(state, self.n_qubits)
        xm, zm, phase, coef = self._arrays
        return kernels.pauli_sum_apply(xm, zm, phase * coef, state)

    def to_sparse(self):
        import scipy.sparse as sp

        dim = 1 << self.n_qubits
        idx = np.arange(dim, dtype=np.int64)
        mat = sp.csr_matrix((dim, dim), dtype=np.complex128)
        for p, c in self._terms.items():
            sgn = 1.0 - 2.0 * (np.bitwise_count(idx & p.zmask) & 1)
            vals = c * _I_POWERS[p.n_y % 4] * sgn
            mat = mat + sp.csr_matrix((vals, (idx ^ p.xmask, idx)), shape=(dim, dim))
        return mat

    def to_matrix(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def content_hash(self) -> str:
        """Stable hash of the term list, rounded to 12 decimals."""
        h = hashlib.sha256()
        h.update(str(self.n_qubits).encode())
        for p, c in self._terms.items():
            h.update(f"|{p.xmask},{p.zmask}:{c:.12e}".encode())
        return h.hexdigest()[:16]

    def to_text(self) -> str:
        lines = [f"{c!r} {p}" if p.weight else f"{c!r}" for p, c in self._terms.items()]
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"QubitHamiltonian(n_qubits={self.n_qubits}, n_terms={len(self)})"


def _check_state(state: np.ndarray, n_qubits: int) -> np.ndarray:
    state = np.ascontiguousarray(state, dtype=np.complex128)
    if state.ndim != 1 or state.shape[0] != 1 << n_qubits:
        raise ValidationError(
            f"expected a statevector of length {1 << n_qubits}, got shape {state.shape}"
        )
    return state


def term_expectations(h: QubitHamiltonian, state: np.ndarray) -> np.ndarray:
    """Per-term ``c_k <P_k>``, one string application per term."""
    state = _check_state(state, h.n_qubits)
    xm, zm, phase, coef = h._arrays
    return coef * kernels.pauli_expectations(xm, zm, phase, state)


def expectation(h: QubitHamiltonian, state: np.ndarray) -> float:
    """<state|H|state> for a normalized statevector."""
    val = complex(np.sum(term_expectations(h, state)))
    if abs(val.imag) > 1e-10:
        raise NumericalError(f"expectation value has imaginary part {val.imag:.3e}")
    return val.real


def variance(h: QubitHamiltonian, state: np.ndarray) -> float:
    """Tr[H^2 rho] - Tr[H rho]^2 for a statevector (1-D) or density matrix (2-D)."""
    state = np.asarray(state, dtype=np.complex128)
    if state.ndim == 2:
        mat = h.to_sparse()
        hr = mat @ state
        e = np.trace(hr).real
        var = np.trace(mat @ hr).real - e * e
    else:
        hpsi = h.apply(state)
        e = np.vdot(state, hpsi).real
        var = np.vdot(hpsi, hpsi).real - e * e
    # clip rounding noise at zero but leave genuinely negative values visible
    return float(max(var, 0.0)) if var > -1e-12 else float(var)


def parse_pauli_hamiltonian(text: str | bytes, n_qubits: int | None = None) -> QubitHamiltonian:
    """Parse lines of ``coeff P<q> P<q> ...`` (e.g. ``0.5 X0 Z2``).

    Blank lines and lines starting with ``#`` are ignored.  A line with only a
    coefficient is an identity term.  ``n_qubits`` defaults to one more than
    the largest index seen.
    """
    if isinstance(text, bytes):
        text = text.decode()
    parsed: list[tuple[float, list[tuple[int, str]]]] = []
    top = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            coeff = float(fields[0])
        except ValueError:
            raise ParseError(f"bad coefficient {fields[0]!r}", lineno) from None
        ops = []
        for tok in fields[1:]:
            letter, digits = tok[0].upper(), tok[1:]
            if letter not in "XYZI" or not digits.isdigit():
                raise ParseError(f"bad Pauli factor {tok!r}", lineno)
            if letter != "I":
                ops.append((int(digits), letter))
                top = max(top, int(digits))
        if len({q for q, _ in ops}) != len(ops):
            raise ParseError("qubit repeated within a term", lineno)
        parsed.append((coeff, ops))
    n = top + 1 if n_qubits is None else n_qubits
    if top >= n:
        raise ValidationError(f"qubit index {top} exceeds n_qubits={n}")
    return QubitHamiltonian(max(n, 1), [(c, PauliString.from_ops(ops, max(n, 1))) for c, ops in parsed])


def serialize_pauli_hamiltonian(h: QubitHamiltonian) -> str:
    return h.to_text()
