"""Ansatz-element pools and the commutation relations used to explore and layer them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations, product
from math import comb
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .pauli import PauliString, pauli_strings_commute


class ElementKind(str, Enum):
    FERMIONIC_SINGLE = "fermionic_single"
    FERMIONIC_DOUBLE = "fermionic_double"
    QEB_SINGLE = "qeb_single"
    QEB_DOUBLE = "qeb_double"
    PAULI = "pauli"

    @property
    def family(self) -> str:
        return {"fermionic_single": "fermionic", "fermionic_double": "fermionic",
                "qeb_single": "qeb", "qeb_double": "qeb", "pauli": "qubit"}[self.value]


POOL_KINDS = ("fermionic", "qeb", "qubit")


@dataclass(frozen=True)
class AnsatzElement:
    """One pool generator ``T`` (anti-Hermitian) with a stable integer id.

    Excitations are ``prod_k c+_k prod_l c_l - h.c.`` where ``c`` is a fermionic
    (``a``) or qubit (``Q``) annihilator; ``create`` holds ``k`` and
    ``annihilate`` holds ``l``.  Pauli rotations are ``T = iP``.
    """

    kind: ElementKind
    n_qubits: int
    create: tuple[int, ...] = ()
    annihilate: tuple[int, ...] = ()
    pauli: PauliString | None = None
    id: int = field(default=-1, compare=False)

    def __post_init__(self):
        if self.kind is ElementKind.PAULI:
            if self.pauli is None or self.pauli.n_y % 2 != 1:
                raise ValidationError("Pauli rotation needs a string with an odd number of Y")
            if self.pauli.n_qubits != self.n_qubits:
                raise ValidationError("Pauli string size mismatch")
        else:
            idx = self.create + self.annihilate
            if len(set(idx)) != len(idx):
                raise ValidationError(f"repeated index in {idx}")
            if any(not 0 <= i < self.n_qubits for i in idx):
                raise ValidationError(f"index out of range in {idx}")
            want = 1 if self.kind.value.endswith("single") else 2
            if len(self.create) != want or len(self.annihilate) != want:
                raise ValidationError(f"{self.kind.value} needs {want}+{want} indices")

    @property
    def family(self) -> str:
        return self.kind.family

    @cached_property
    def support_mask(self) -> int:
        if self.pauli is not None:
            return self.pauli.xmask | self.pauli.zmask
        m = 0
        for i in self.create + self.annihilate:
            m |= 1 << i
        return m

    @property
    def support(self) -> frozenset[int]:
        m = self.support_mask
        return frozenset(q for q in range(self.n_qubits) if (m >> q) & 1)

    @property
    def order(self) -> int:
        """Number of qubits acted on (``q``)."""
        return self.support_mask.bit_count()

    @property
    def indices(self) -> tuple[int, ...]:
        if self.pauli is not None:
            return tuple(sorted(self.support))
        return self.create + self.annihilate

    @property
    def letters(self) -> str:
        if self.pauli is None:
            return ""
        return "".join(self.pauli.letter(q) for q in self.indices)

    def sort_key(self):
        return (self.order, self.indices, self.letters)

    def label(self) -> str:
        if self.pauli is not None:
            return "i " + " ".join(f"{p}{q}" for q, p in self.pauli.ops())
        k = ",".join(map(str, self.create))
        l = ",".join(map(str, self.annihilate))
        return f"{self.kind.value}[{k};{l}]"

    @cached_property
    def pair_map(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Arrays ``(src, dst, sign)`` with ``T|src> = sign|dst>`` and ``T|dst> = -sign|src>``.

        Every basis state outside ``src`` and ``dst`` is annihilated by ``T``.
        """
        return _build_pair_map(self)

    def to_dict(self) -> dict:
        out = {"id": self.id, "kind": self.kind.value, "support": sorted(self.support)}
        if self.pauli is not None:
            out["string"] = [[q, p] for q, p in self.pauli.ops()]
        else:
            out["create"] = list(self.create)
            out["annihilate"] = list(self.annihilate)
        return out

    @classmethod
    def from_dict(cls, d: Mapping, n_qubits: int) -> AnsatzElement:
        kind = ElementKind(d["kind"])
        if kind is ElementKind.PAULI:
            return cls(kind, n_qubits, pauli=PauliString.from_ops([(q, p) for q, p in d["string"]], n_qubits), id=d.get("id", -1))
        return cls(kind, n_qubits, tuple(d["create"]), tuple(d["annihilate"]), id=d.get("id", -1))


def _jw_parity(states: np.ndarray, j: int) -> np.ndarray:
    return np.bitwise_count(states & ((1 << j) - 1)) & 1


def _build_pair_map(e: AnsatzElement):
    n = e.n_qubits
    all_states = np.arange(1 << n, dtype=np.int64)
    if e.pauli is not None:
        xm, zm = e.pauli.xmask, e.pauli.zmask
        low = xm & -xm
        src = all_states[(all_states & low) == 0]
        dst = src ^ xm
        base = -1.0 if ((e.pauli.n_y + 1) // 2) % 2 else 1.0
        sign = base * (1.0 - 2.0 * (np.bitwise_count(src & zm) & 1))
        return src, dst, sign.astype(np.float64)
    kmask = sum(1 << k for k in e.create)
    lmask = sum(1 << l for l in e.annihilate)
    src = all_states[((all_states & lmask) == lmask) & ((all_states & kmask) == 0)]
    dst = src ^ (kmask | lmask)
    if e.family == "qeb":
        return src, dst, np.ones(src.shape[0])
    # a+_{k0} a+_{k1} a_{l0} a_{l1}: rightmost operator acts first
    flips = np.zeros(src.shape[0], dtype=np.int64)
    cur = src.copy()
    for j in reversed(e.annihilate):
        flips += _jw_parity(cur, j)
        cur = cur ^ (1 << j)
    for j in reversed(e.create):
        flips += _jw_parity(cur, j)
        cur = cur ^ (1 << j)
    return src, dst, 1.0 - 2.0 * (flips & 1)


# --- pool construction ------------------------------------------------------


def _excitation_index_sets(n: int, q: int) -> Iterable[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Canonical ``(k, l)`` for every support of size ``q``: ``k[0]`` is the smallest index."""
    half = q // 2
    for sup in combinations(range(n), q):
        k0, rest = sup[0], sup[1:]
        for k_rest in combinations(rest, half - 1):
            l = tuple(x for x in rest if x not in k_rest)
            yield (k0, *k_rest), l


@dataclass(frozen=True)
class Pool:
    kind: str
    n_qubits: int
    elements: tuple[AnsatzElement, ...]
    V: tuple[int, ...] = (2, 4)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i: int) -> AnsatzElement:
        return self.elements[i]

    @property
    def ids(self) -> list[int]:
        return [e.id for e in self.elements]

    @cached_property
    def _masks(self):
        sup = np.array([e.support_mask for e in self.elements], dtype=np.int64)
        if self.kind == "qubit":
            xm = np.array([e.pauli.xmask for e in self.elements], dtype=np.int64)
            zm = np.array([e.pauli.zmask for e in self.elements], dtype=np.int64)
        else:
            # for excitations: occupied-index masks of the two connected states
            xm = np.array([_mask(e.create) for e in self.elements], dtype=np.int64)
            zm = np.array([_mask(e.annihilate) for e in self.elements], dtype=np.int64)
        return sup, xm, zm

    def noncommuting_matrix(self, relation: CommutationRelation) -> np.ndarray:
        """Boolean ``M[i, j]`` = elements i and j violate ``relation`` (diagonal False)."""
        key = relation.tag if relation.tag != "custom" else id(relation)
        cache = self.__dict__.setdefault("_adjacency", {})
        if key not in cache:
            cache[key] = self._build_adjacency(relation)
        return cache[key]

    def _build_adjacency(self, relation: CommutationRelation) -> np.ndarray:
        sup, xm, zm = self._masks
        overlap = (sup[:, None] & sup[None, :]) != 0
        if relation.tag == "support":
            mat = overlap
        elif relation.tag == "operator":
            if self.kind == "qubit":
                odd = (np.bitwise_count(xm[:, None] & zm[None, :]) + np.bitwise_count(zm[:, None] & xm[None, :])) & 1
                mat = odd.astype(bool)
            else:
                o = sup[:, None] & sup[None, :]
                c1, a1 = xm[:, None] & o, zm[:, None] & o
                c2, a2 = xm[None, :] & o, zm[None, :] & o
                same = ((xm[:, None] == xm[None, :]) & (zm[:, None] == zm[None, :])) | (
                    (xm[:, None] == zm[None, :]) & (zm[:, None] == xm[None, :])
                )
                mat = overlap & ~same & ((c1 == c2) | (c1 == a2) | (a1 == c2) | (a1 == a2))
        else:
            n = len(self.elements)
            mat = np.zeros((n, n), dtype=bool)
            for i, j in combinations(range(n), 2):
                mat[i, j] = mat[j, i] = not relation.commute(self.elements[i], self.elements[j])
        mat = np.array(mat, dtype=bool)
        np.fill_diagonal(mat, False)
        mat.setflags(write=False)
        return mat

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "n_qubits": self.n_qubits, "V": list(self.V),
             "elements": [e.to_dict() for e in self.elements]},
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> Pool:
        d = json.loads(text)
        elems = tuple(AnsatzElement.from_dict(e, d["n_qubits"]) for e in d["elements"])
        return cls(d["kind"], d["n_qubits"], elems, tuple(d["V"]))


def build_pool(kind: str, n_qubits: int, V: Sequence[int] = (2, 4)) -> Pool:
    """Enumerate every element of a pool in canonical order.

    Args:
        kind: ``"fermionic"``, ``"qeb"`` or ``"qubit"``.
        n_qubits: Number of qubits ``N``.
        V: Even support sizes to include.

    Returns:
        Pool whose element ids equal their position.
    """
    kind = kind.lower()
    if kind not in POOL_KINDS:
        raise ValidationError(f"unknown pool kind {kind!r}")
    if n_qubits < 2:
        raise ValidationError("pools need at least two qubits")
    V = tuple(sorted(set(V)))
    if any(q <= 0 or q % 2 for q in V):
        raise ValidationError("support sizes must be positive even integers")
    if n_qubits < min(V):
        raise ValidationError(f"N={n_qubits} is smaller than every support size in {V}")
    elems: list[AnsatzElement] = []
    for q in V:
        if q > n_qubits:
            continue
        if kind == "qubit":
            for sup in combinations(range(n_qubits), q):
                for letters in product("XY", repeat=q):
                    if letters.count("Y") % 2 == 1:
                        p = PauliString.from_ops(zip(sup, letters), n_qubits)
                        elems.append(AnsatzElement(ElementKind.PAULI, n_qubits, pauli=p))
        else:
            if q > 4:
                # excitations are defined for any even q; only kinds up to doubles are named
                raise ValidationError("fermionic/QEB pools support q in {2, 4}")
            ek = {("fermionic", 2): ElementKind.FERMIONIC_SINGLE, ("fermionic", 4): ElementKind.FERMIONIC_DOUBLE,
                  ("qeb", 2): ElementKind.QEB_SINGLE, ("qeb", 4): ElementKind.QEB_DOUBLE}[(kind, q)]
            for k, l in _excitation_index_sets(n_qubits, q):
                elems.append(AnsatzElement(ek, n_qubits, k, l))
    elems.sort(key=AnsatzElement.sort_key)
    elems = [AnsatzElement(e.kind, e.n_qubits, e.create, e.annihilate, e.pauli, id=i) for i, e in enumerate(elems)]
    return Pool(kind, n_qubits, tuple(elems), V)


def pool_cardinality(kind: str, n_qubits: int, V: Sequence[int] = (2, 4)) -> int:
    """Closed-form pool size."""
    if kind == "qubit":
        return sum(2 ** (q - 1) * comb(n_qubits, q) for q in V if q <= n_qubits)
    return sum(comb(q - 1, q // 2) * comb(n_qubits, q) for q in V if q <= n_qubits)


# --- commutation ------------------------------------------------------------


def operator_commute(a: AnsatzElement, b: AnsatzElement) -> bool:
    """Whether the generators commute (for every pair of parameter values)."""
    if a.family != b.family:
        raise ValidationError(f"cannot compare {a.family} and {b.family} elements")
    if a.n_qubits != b.n_qubits:
        raise ValidationError("elements act on different qubit counts")
    if a.family == "qubit":
        return pauli_strings_commute(a.pauli, b.pauli)
    o = a.support_mask & b.support_mask
    if not o or {a.create, a.annihilate} == {b.create, b.annihilate}:
        return True
    # both products vanish when the occupation patterns the generators connect differ on the overlap
    pa = {_mask(a.create) & o, _mask(a.annihilate) & o}
    pb = {_mask(b.create) & o, _mask(b.annihilate) & o}
    return not pa & pb


def _mask(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def support_commute(a: AnsatzElement, b: AnsatzElement) -> bool:
    if a.n_qubits != b.n_qubits:
        raise ValidationError("elements act on different qubit counts")
    return (a.support_mask & b.support_mask) == 0


@dataclass(frozen=True)
class CommutationRelation:
    """A symmetric predicate deciding whether two elements may share a layer."""

    tag: str
    predicate: Callable[[AnsatzElement, AnsatzElement], bool] | None = None

    def __post_init__(self):
        if self.tag not in ("operator", "support", "custom"):
            raise ValidationError(f"unknown relation tag {self.tag!r}")
        if self.tag == "custom" and self.predicate is None:
            raise ValidationError("custom relations need a predicate")

    def commute(self, a: AnsatzElement, b: AnsatzElement) -> bool:
        if self.tag == "operator":
            return operator_commute(a, b)
        if self.tag == "support":
            return support_commute(a, b)
        return bool(self.predicate(a, b))

    def check_valid(self, pool: Pool) -> None:
        """Raise unless every operator-non-commuting pair is also non-commuting here."""
        op = pool.noncommuting_matrix(OPERATOR)
        mine = pool.noncommuting_matrix(self)
        bad = np.argwhere(op & ~mine)
        if bad.size:
            i, j = bad[0]
            raise ValidationError(
                f"relation {self.tag!r} treats non-commuting elements {i} and {j} as commuting"
            )


OPERATOR = CommutationRelation("operator")
SUPPORT = CommutationRelation("support")


def relation_from_tag(tag: str) -> CommutationRelation:
    if tag == "operator":
        return OPERATOR
    if tag == "support":
        return SUPPORT
    raise ValidationError(f"unknown commutation relation {tag!r}")


def noncommuting_set(
    pool_subset: Iterable[AnsatzElement], a: AnsatzElement, relation: CommutationRelation
) -> list[AnsatzElement]:
    """Elements of ``pool_subset`` that fail ``relation`` with ``a`` (``a`` itself excluded)."""
    return [b for b in pool_subset if b != a and not relation.commute(a, b)]


def noncommuting_ids(pool: Pool, a_id: int, candidate_ids: Iterable[int], relation: CommutationRelation) -> list[int]:
    """Fast id-based variant of :func:`noncommuting_set` using the pool's adjacency matrix."""
    row = pool.noncommuting_matrix(relation)[a_id]
    return [i for i in candidate_ids if row[i]]


def noncommuting_set_cardinality(kind: str, relation: str, q: int, n_qubits: int, V: Sequence[int] = (2, 4)) -> int:
    """Closed-form size of the non-commuting set of any ``q``-qubit element of the full pool.

    For QEB pools the ``"operator"`` value is the published formula, which
    assumes distinct supports never commute. Exact enumeration gives fewer
    (see :func:`qeb_operator_cardinality`); the support form and both qubit
    forms agree with enumeration.

    Args:
        kind: ``"qeb"`` or ``"qubit"``.
        relation: ``"support"`` or ``"operator"``.
        q: Support size of the reference element (must be in ``V``).
        n_qubits: Number of qubits ``N``.
        V: Support sizes of the pool.
    """
    if kind not in ("qeb", "qubit"):
        raise ValidationError(f"no closed form for {kind!r} pools")
    if q not in V:
        raise ValidationError(f"q={q} is not among the pool's support sizes {tuple(V)}")
    if relation not in ("support", "operator"):
        raise ValidationError(f"unknown relation {relation!r}")
    total = 0
    for p in V:
        if p > n_qubits:
            continue
        if relation == "support":
            top = min(p, q)
            mult = comb(p - 1, p // 2) if kind == "qeb" else 2 ** (p - 1)
        else:
            top = q - 1 if p == q else min(p, q)
            mult = comb(p - 1, p // 2) if kind == "qeb" else 2 ** (p - 2)
        total += sum(mult * comb(q, a) * comb(n_qubits - q, p - a) for a in range(1, top + 1))
    # self-exclusion appears only in the support form; the operator form already skips equal supports
    return total - 1 if relation == "support" else total


def qeb_operator_cardinality(q: int, n_qubits: int) -> int:
    """Exact non-commuting set size under the operator relation for the QEB pool with V = (2, 4).

    Two excitations fail to commute only when their supports overlap and
    they connect a common occupation pattern on that overlap.
    """
    n = n_qubits
    if q == 2:
        return 2 * (n - 2) + 6 * comb(n - 2, 3) + 2 * comb(n - 2, 2)
    if q == 4:
        return 8 * (n - 4) + 4 + 12 * comb(n - 4, 3) + 10 * comb(n - 4, 2)
    raise ValidationError(f"q={q} is not a QEB support size")


def pool_distance(a: AnsatzElement, b: AnsatzElement, relation: CommutationRelation) -> int:
    if a == b:
        return 0
    return 2 if relation.commute(a, b) else 1


def is_local_minimum(
    pool: Pool | Sequence[AnsatzElement],
    a: AnsatzElement,
    loss_values: Mapping[int, float] | Sequence[float],
    relation: CommutationRelation,
) -> bool:
    """True iff ``a``'s loss is minimal over ``a`` and its non-commuting set in ``pool``.

    Raises:
        ValidationError: A loss needed for the check is missing.
    """
    ball = [a] + noncommuting_set(pool, a, relation)

    def loss(e):
        try:
            return loss_values[e.id]
        except (KeyError, IndexError):
            raise ValidationError(f"no loss value for element {e.id}") from None

    la = loss(a)
    return all(la <= loss(b) for b in ball)
