from __future__ import annotations

import json

import numpy as np
import pytest

from adaptlayer.errors import ValidationError
from adaptlayer.layout import (
    CNOT_GATE_TIME,
    SINGLE_GATE_TIME,
    Gate,
    GateSchedule,
    Layer,
    check_layer,
    cnot_accounting,
    decompose_into_layers,
    flatten_layers,
    layer_duration,
    layers_from_groups,
    transpile_layer,
)
from adaptlayer.pools import OPERATOR, SUPPORT, build_pool
from adaptlayer.simulator import AnsatzCircuit, run_circuit
from oracles import random_state


def qeb_single(pool, a, b):
    return next(e for e in pool if e.kind.value == "qeb_single" and set(e.indices) == {a, b})


def test_greedy_example():
    pool = build_pool("qeb", 4)
    e1, e2, e3 = qeb_single(pool, 0, 1), qeb_single(pool, 2, 3), qeb_single(pool, 0, 2)
    layers = decompose_into_layers(AnsatzCircuit([e1, e2, e3], [0.1, 0.2, 0.3]), SUPPORT)
    assert [l.elements for l in layers] == [[e1, e2], [e3]]
    assert layers[0].parameters == [0.1, 0.2]


def test_decomposition_is_idempotent_and_valid():
    rng = np.random.default_rng(0)
    pool = build_pool("qeb", 8)
    for _ in range(20):
        c = AnsatzCircuit([pool[i] for i in rng.choice(len(pool), 12)], list(rng.normal(size=12)))
        for rel in (SUPPORT, OPERATOR):
            layers = decompose_into_layers(c, rel)
            assert all(check_layer(l, rel) for l in layers)
            again = decompose_into_layers(flatten_layers(layers), rel)
            assert [l.elements for l in again] == [l.elements for l in layers]
            assert len(layers) <= len(c)
        for l in decompose_into_layers(c, SUPPORT):
            assert len(l) <= 8 // 2


def test_layered_replay_matches_sequential():
    rng = np.random.default_rng(1)
    for kind in ("qeb", "qubit", "fermionic"):
        pool = build_pool(kind, 6)
        for _ in range(5):
            c = AnsatzCircuit([pool[i] for i in rng.choice(len(pool), 10)], list(rng.normal(size=10)))
            psi = random_state(6, rng)
            rel = OPERATOR if kind == "fermionic" else SUPPORT
            layered = flatten_layers(decompose_into_layers(c, rel))
            np.testing.assert_allclose(run_circuit(layered, psi), run_circuit(c, psi), atol=1e-12)


def test_groups_helper():
    pool = build_pool("qeb", 4)
    c = AnsatzCircuit(list(pool)[:3], [0.0] * 3)
    layers = layers_from_groups(c, [1, 1, 2])
    assert [len(l) for l in layers] == [2, 1]
    with pytest.raises(ValidationError):
        layers_from_groups(c, [2, 1, 1])


def test_transpile_examples():
    sched = GateSchedule.default()
    pool = build_pool("qeb", 4)
    a, b = qeb_single(pool, 0, 1), qeb_single(pool, 2, 3)
    one = transpile_layer(Layer(0, [a], [0.0]), sched)
    assert one == sched.element_columns(a)
    assert sum(g.kind == "cnot" for col in one for g in col) == 2
    two = transpile_layer(Layer(0, [a, b], [0.0, 0.0]), sched)
    assert len(two) == len(one)
    assert transpile_layer(Layer(0), sched) == []
    with pytest.raises(ValidationError):
        transpile_layer(Layer(0, [a, qeb_single(pool, 1, 2)], [0, 0]), sched)
    with pytest.raises(ValidationError, match="missing schedule entry"):
        transpile_layer(Layer(0, [build_pool("fermionic", 4)[0]], [0.0]), sched)


def test_layer_duration_examples():
    cnot = Gate("cnot", (1, 0))
    single = Gate("single", (2,))
    assert layer_duration([[cnot]]) == pytest.approx(295.1e-9)
    assert layer_duration([[cnot, single]]) == pytest.approx(295.1e-9)
    assert layer_duration([[single], [single]]) == pytest.approx(71.0e-9)
    assert (SINGLE_GATE_TIME, CNOT_GATE_TIME) == (35.5e-9, 295.1e-9)


def test_default_schedule_counts_from_table():
    # count CNOT entries directly from the shipped JSON, independent of the loader
    from importlib import resources

    table = json.loads(resources.files("adaptlayer").joinpath("data", "default_schedule.json").read_text())
    count = lambda key: sum(g["gate"] == "cnot" for col in table["elements"][key] for g in col)
    assert count("qeb_double") == 13
    assert count("qeb_single") == 2
    assert count("pauli_4") == 6 and count("pauli_2") == 2
    pool = build_pool("qeb", 4)
    double = next(e for e in pool if e.kind.value == "qeb_double")
    timing = cnot_accounting(AnsatzCircuit([double], [0.0]))
    assert timing.n_cnot == 13
    assert timing.cnot_targets.sum() == timing.n_cnot


def test_schedule_columns_are_disjoint_and_controls_high():
    sched = GateSchedule.default()
    for cols in sched.entries.values():
        for col in cols:
            qs = [q for g in col for q in g.qubits]
            assert len(qs) == len(set(qs))
            for g in col:
                if g.kind == "cnot":
                    assert g.qubits[0] > g.qubits[1]
    with pytest.raises(ValidationError):
        GateSchedule.from_dict({"elements": {"x": [[{"gate": "cnot", "control": 1, "target": 0}, {"gate": "single", "qubits": [1]}]]}})


def test_cnot_count_independent_of_layering():
    rng = np.random.default_rng(2)
    pool = build_pool("qeb", 8)
    for _ in range(10):
        c = AnsatzCircuit([pool[i] for i in rng.choice(len(pool), 10)], [0.0] * 10)
        sequential = [Layer(k, [e], [0.0], [k]) for k, e in enumerate(c.elements)]
        t1 = cnot_accounting(c)
        t2 = cnot_accounting(c, layers=sequential)
        assert t1.n_cnot == t2.n_cnot
        assert t1.n_layers <= t2.n_layers
        assert np.all(t1.durations > 0)
        assert t2.total_duration >= t1.total_duration
        d = t1.to_dict()
        assert d["n_cnot"] == int(np.sum(d["cnot_targets"]))


def test_pauli_rotation_staircase_targets():
    pool = build_pool("qubit", 5)
    e = next(x for x in pool if x.order == 4 and x.indices == (1, 2, 3, 4))
    t = cnot_accounting(AnsatzCircuit([e], [0.0]))
    assert t.n_cnot == 6
    assert t.cnot_targets[0].tolist() == [0, 2, 2, 2, 0]
