"""Layer decomposition, native-gate transpilation and CNOT/duration accounting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .pools import SUPPORT, AnsatzElement, CommutationRelation
from .simulator import AnsatzCircuit

SINGLE_GATE_TIME = 35.5e-9
CNOT_GATE_TIME = 295.1e-9


@dataclass
class Layer:
    """Elements scheduled together; ``positions`` index into the source circuit."""

    index: int
    elements: list[AnsatzElement] = field(default_factory=list)
    parameters: list[float] = field(default_factory=list)
    positions: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.elements)


def decompose_into_layers(circuit: AnsatzCircuit, relation: CommutationRelation = SUPPORT) -> list[Layer]:
    """As-soon-as-possible layering that keeps every conflicting pair in circuit order.

    Each element goes one layer past the latest earlier element it fails
    ``relation`` with, so replaying the layers reproduces the circuit exactly.
    """
    level: list[int] = []
    layers: list[Layer] = []
    for k, (e, th) in enumerate(zip(circuit.elements, circuit.parameters)):
        lvl = 0
        for j in range(k):
            if level[j] >= lvl and not relation.commute(circuit.elements[j], e):
                lvl = level[j] + 1
        level.append(lvl)
        if lvl == len(layers):
            layers.append(Layer(lvl))
        layers[lvl].elements.append(e)
        layers[lvl].parameters.append(th)
        layers[lvl].positions.append(k)
    return layers


def flatten_layers(layers: Sequence[Layer]) -> AnsatzCircuit:
    c = AnsatzCircuit()
    for layer in layers:
        for e, th in zip(layer.elements, layer.parameters):
            c.append(e, th, layer.index)
    return c


def layers_from_groups(circuit: AnsatzCircuit, groups: Sequence[int]) -> list[Layer]:
    """Layers given an explicit group label per element (labels must be non-decreasing)."""
    if len(groups) != len(circuit):
        raise ValidationError("one group label per element is required")
    layers: list[Layer] = []
    last = None
    for k, (e, th, g) in enumerate(zip(circuit.elements, circuit.parameters, groups)):
        if last is not None and g < last:
            raise ValidationError("group labels must be non-decreasing")
        if g != last:
            layers.append(Layer(len(layers)))
            last = g
        layers[-1].elements.append(e)
        layers[-1].parameters.append(th)
        layers[-1].positions.append(k)
    return layers


def check_layer(layer: Layer, relation: CommutationRelation) -> bool:
    els = layer.elements
    return all(relation.commute(els[i], els[j]) for i in range(len(els)) for j in range(i + 1, len(els)))


# --- native gates -----------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    kind: str  # "single" or "cnot"
    qubits: tuple[int, ...]  # (q,) or (control, target)

    @property
    def target(self) -> int | None:
        return self.qubits[1] if self.kind == "cnot" else None


@dataclass(frozen=True)
class GateSchedule:
    """Per-element-kind columns of native gates on local (sorted-support) qubit indices."""

    entries: Mapping[str, tuple[tuple[Gate, ...], ...]]
    gate_times: Mapping[str, float]

    @classmethod
    def from_dict(cls, table: Mapping) -> GateSchedule:
        entries = {}
        for key, cols in table["elements"].items():
            parsed = []
            for col in cols:
                gates = []
                for g in col:
                    if g["gate"] == "single":
                        gates.append(Gate("single", (int(g["qubits"][0]),)))
                    elif g["gate"] == "cnot":
                        gates.append(Gate("cnot", (int(g["control"]), int(g["target"]))))
                    else:
                        raise ValidationError(f"unknown gate {g['gate']!r} in schedule entry {key!r}")
                used = [q for gate in gates for q in gate.qubits]
                if len(used) != len(set(used)):
                    raise ValidationError(f"schedule entry {key!r} has a column with overlapping gates")
                parsed.append(tuple(gates))
            entries[key] = tuple(parsed)
        times = {"single": SINGLE_GATE_TIME, "cnot": CNOT_GATE_TIME}
        times.update({k: float(v) for k, v in table.get("gate_times", {}).items()})
        return cls(entries, times)

    @classmethod
    def from_json(cls, text: str) -> GateSchedule:
        return cls.from_dict(json.loads(text))

    @classmethod
    def default(cls) -> GateSchedule:
        text = resources.files("adaptlayer").joinpath("data", "default_schedule.json").read_text()
        return cls.from_json(text)

    def key_for(self, e: AnsatzElement) -> str:
        return f"pauli_{e.order}" if e.kind.value == "pauli" else e.kind.value

    def element_columns(self, e: AnsatzElement) -> list[list[Gate]]:
        """Columns for ``e`` with local indices mapped onto its support."""
        key = self.key_for(e)
        if key not in self.entries:
            raise ValidationError(f"missing schedule entry for element kind {key!r}")
        qubits = sorted(e.support)
        out = []
        for col in self.entries[key]:
            out.append([Gate(g.kind, tuple(qubits[q] for q in g.qubits)) for g in col])
        return out


def transpile_layer(layer: Layer, schedule: GateSchedule) -> list[list[Gate]]:
    """Left-aligned union of each element's gate columns.

    Raises:
        ValidationError: Elements overlap in support or a kind has no schedule entry.
    """
    seen = 0
    for e in layer.elements:
        if seen & e.support_mask:
            raise ValidationError("elements sharing qubits cannot be transpiled into one layer")
        seen |= e.support_mask
    per = [schedule.element_columns(e) for e in layer.elements]
    depth = max((len(c) for c in per), default=0)
    columns: list[list[Gate]] = [[] for _ in range(depth)]
    for cols in per:
        for i, col in enumerate(cols):
            columns[i].extend(col)
    return columns


def layer_duration(columns: Sequence[Sequence[Gate]], gate_times: Mapping[str, float] | None = None) -> float:
    times = gate_times or {"single": SINGLE_GATE_TIME, "cnot": CNOT_GATE_TIME}
    return float(sum(max((times[g.kind] for g in col), default=0.0) for col in columns))


@dataclass
class LayerTiming:
    durations: np.ndarray  # tau_l, seconds
    cnot_targets: np.ndarray  # M[l, r]
    n_columns: list[int]
    layers: list[Layer]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_cnot(self) -> int:
        return int(self.cnot_targets.sum())

    @property
    def column_depth(self) -> int:
        return int(sum(self.n_columns))

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    def to_dict(self) -> dict:
        return {
            "durations_s": [float(x) for x in self.durations],
            "cnot_targets": self.cnot_targets.astype(int).tolist(),
            "n_columns": list(self.n_columns),
            "element_layers": self.n_layers,
            "column_depth": self.column_depth,
            "n_cnot": self.n_cnot,
            "total_duration_s": self.total_duration,
        }


def cnot_accounting(
    circuit: AnsatzCircuit,
    schedule: GateSchedule | None = None,
    layers: Sequence[Layer] | None = None,
    n_qubits: int | None = None,
) -> LayerTiming:
    """Per-layer durations, CNOT-target counts and depth totals.

    Args:
        circuit: The ansatz circuit.
        schedule: Native-gate table; the shipped default when omitted.
        layers: Pre-computed layers; support-relation ASAP layering otherwise.
        n_qubits: Register size, inferred from the elements when omitted.
    """
    schedule = schedule or GateSchedule.default()
    if layers is None:
        layers = decompose_into_layers(circuit, SUPPORT)
    if n_qubits is None:
        n_qubits = circuit.elements[0].n_qubits if circuit.elements else 0
    durations = np.zeros(len(layers))
    m = np.zeros((len(layers), n_qubits), dtype=np.int64)
    n_cols = []
    for l, layer in enumerate(layers):
        cols = transpile_layer(layer, schedule)
        durations[l] = layer_duration(cols, schedule.gate_times)
        n_cols.append(len(cols))
        for col in cols:
            for g in col:
                if g.kind == "cnot":
                    m[l, g.target] += 1
    return LayerTiming(durations, m, n_cols, list(layers))
