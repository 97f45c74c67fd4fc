"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are collected in ``RESULTS`` and printed in the terminal summary by
``conftest.py`` so they show up even with captured output.
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest
import scipy.linalg

from adaptlayer import cli
from adaptlayer.adapt import Counters, RunConfig, TableLoss, build_static_layer, optimize_circuit, run_algorithm, select_standard, subpool_exploration
from adaptlayer.hamiltonian import exact_ground_energy, hartree_fock_state, jordan_wigner, load_molecule
from adaptlayer.noise_analysis import MODELS, LayeredCircuit, finite_difference, susceptibility
from adaptlayer.optimize import OptimizerSettings, bfgs_minimize
from adaptlayer.pauli import PauliString, QubitHamiltonian, variance
from adaptlayer.pools import OPERATOR, SUPPORT, build_pool, is_local_minimum, noncommuting_set_cardinality, operator_commute, qeb_operator_cardinality
from adaptlayer.simulator import (
    AmplitudeDamping,
    AnsatzCircuit,
    DampingDerivative,
    Dephasing,
    Depolarizing,
    apply_channel,
    energy_and_gradient,
)

from oracles import commutes, element_generator, random_state

RESULTS: list[str] = []
ALGORITHMS = ("standard", "explore", "static", "dynamic")
CHEMICAL_ACCURACY = 1.6e-3


def report(number: int, title: str, ok: bool, detail: str = "") -> None:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}" + (f" ({detail})" if detail else ""))
    assert ok, detail


def molecule(name):
    spec, ints, _ = load_molecule(name)
    h = jordan_wigner(ints)
    return h, hartree_fock_state(h.n_qubits, spec.n_electrons), exact_ground_energy(h, spec.n_electrons)


@pytest.fixture(scope="module")
def h2():
    return molecule("h2")


@pytest.fixture(scope="module")
def h4_runs():
    h, psi0, efci = molecule("h4")
    runs = {alg: run_algorithm(h, psi0, RunConfig(algorithm=alg), efci) for alg in ALGORITHMS}
    return h, psi0, efci, runs


def test_criterion_01_commutation_oracle():
    start = time.perf_counter()
    mismatches = checked = 0
    cases = [(k, n) for k in ("qeb", "qubit") for n in range(2, 6)] + [("fermionic", n) for n in range(2, 5)]
    for kind, n in cases:
        pool = build_pool(kind, n)
        gens = [element_generator(e) for e in pool]
        for i, j in itertools.combinations(range(len(pool)), 2):
            checked += 1
            mismatches += operator_commute(pool[i], pool[j]) != commutes(gens[i], gens[j])
    elapsed = time.perf_counter() - start
    report(1, "operator commutation equals dense commutator", mismatches == 0 and elapsed < 120, f"{checked} pairs, {mismatches} mismatches, {elapsed:.1f}s")


@pytest.mark.xfail(
    strict=True,
    reason="published QEB operator closed form and its support gaps disagree with exact commutation (criterion 1)",
)
def test_criterion_02_cardinality_closed_forms():
    bad = []
    gaps_ok = True
    for kind, n, q in itertools.product(("qeb", "qubit"), (4, 6, 8, 10), (2, 4)):
        pool = build_pool(kind, n)
        ids = [e.id for e in pool if e.order == q]
        closed, sizes = {}, {}
        for tag, rel in (("support", SUPPORT), ("operator", OPERATOR)):
            sizes[tag] = set(pool.noncommuting_matrix(rel)[ids].sum(axis=1).tolist())
            closed[tag] = noncommuting_set_cardinality(kind, tag, q, n)
            if sizes[tag] != {closed[tag]}:
                bad.append((kind, n, q, tag, sizes[tag], closed[tag]))
        if kind == "qeb":
            (exact,) = sizes["operator"]
            gaps_ok &= closed["support"] - exact == (2 if q == 4 else 0)
    report(2, "non-commuting set cardinalities match closed forms", not bad and gaps_ok, f"{len(bad)} mismatches, all qeb/operator, e.g. {bad[:2]}; qeb gaps ok={gaps_ok}")


def test_criterion_02_parts_that_hold():
    # support forms and qubit operator forms agree; qeb operator matches the exact count instead
    for kind, n, q in itertools.product(("qeb", "qubit"), (4, 6, 8, 10), (2, 4)):
        pool = build_pool(kind, n)
        ids = [e.id for e in pool if e.order == q]
        for tag, rel in (("support", SUPPORT), ("operator", OPERATOR)):
            sizes = set(pool.noncommuting_matrix(rel)[ids].sum(axis=1).tolist())
            if kind == "qeb" and tag == "operator":
                assert sizes == {qeb_operator_cardinality(q, n)}
            else:
                assert sizes == {noncommuting_set_cardinality(kind, tag, q, n)}


def test_criterion_03_exploration_properties():
    violations = trials = 0
    for n in (4, 6):
        pool = build_pool("qeb", n)
        rng = np.random.default_rng(1000 + n)
        for _ in range(150):
            trials += 1
            losses = -rng.random(len(pool))
            a, searched = subpool_exploration(pool, pool.ids, TableLoss(losses), [int(rng.integers(len(pool)))], SUPPORT)
            ball_ok = is_local_minimum(list(pool), pool[a], losses, SUPPORT)
            in_searched = [pool[i] for i in sorted(searched)]
            local_ok = is_local_minimum(in_searched, pool[a], losses, SUPPORT)
            better = np.flatnonzero(losses < losses[a])
            nonblocking = all(SUPPORT.commute(pool[a], pool[int(b)]) for b in better)
            violations += not (ball_ok and local_ok and nonblocking)
    report(3, "subpool exploration local minimum and non-blocking", violations == 0 and trials >= 200, f"{trials} trials, {violations} violations")


def test_criterion_04_tetris_equivalence():
    mismatches = fixtures = 0
    for n in (4, 6, 8):
        pool = build_pool("qeb", n)
        rng = np.random.default_rng(2000 + n)
        for trial in range(40):
            fixtures += 1
            losses = -(rng.permutation(len(pool)) + 1.0) * rng.uniform(0.5, 2.0)
            layer = build_static_layer(pool, TableLoss(losses), 0.0, None, SUPPORT, rng=np.random.default_rng(trial))
            taken, greedy = 0, []
            for i in np.argsort(losses):
                if losses[i] < 0 and not taken & pool[int(i)].support_mask:
                    greedy.append(int(i))
                    taken |= pool[int(i)].support_mask
            mismatches += sorted(layer) != sorted(greedy)
    report(4, "static layer equals greedy support-disjoint packing", mismatches == 0 and fixtures >= 100, f"{fixtures} fixtures, {mismatches} mismatches")


def test_criterion_05_chemical_accuracy(h2, h4_runs):
    h, psi0, efci = h2
    errors = {f"h2/{alg}": run_algorithm(h, psi0, RunConfig(algorithm=alg), efci).final_error for alg in ALGORITHMS}
    errors.update({f"h4/{alg}": rec.final_error for alg, rec in h4_runs[3].items()})
    worst = max(errors, key=errors.get)
    ok = all(-1e-9 <= e < CHEMICAL_ACCURACY for e in errors.values())
    report(5, "all drivers reach chemical accuracy on H2 and H4", ok, f"worst {worst}: {errors[worst]:.2e} Ha")


def test_criterion_06_layering_benefit(h4_runs):
    runs = h4_runs[3]
    rows = cli.compare_runs([runs["standard"], runs["static"], runs["dynamic"]])
    at_chem = {r["label"]: r for r in rows if r["threshold"] == CHEMICAL_ACCURACY}
    n_standard = runs["standard"].iterations[-1].n_params
    details, ok = [], True
    for alg in ("static", "dynamic"):
        last = runs[alg].iterations[-1]
        depth = last.depth_element_layers
        per_layer = last.n_params / depth
        ok &= depth <= 0.8 * n_standard and per_layer > 1 and at_chem[alg]["depth_element_layers"] is not None
        details.append(f"{alg}: depth {depth} vs {n_standard} elements, {per_layer:.2f} per layer")
    report(6, "layered drivers give shallower H4 circuits", ok, "; ".join(details))


def test_criterion_07_susceptibility_vs_finite_difference(h4_runs):
    h, psi0, _, runs = h4_runs
    start = time.perf_counter()
    worst = 0.0
    for alg in ("standard", "static", "dynamic"):
        lc = LayeredCircuit.build(runs[alg].circuit(), h.n_qubits)
        s = susceptibility(h, lc, psi0)
        for model in MODELS:
            fd = finite_difference(h, lc, psi0, model, 1e-6)
            worst = max(worst, abs(fd - s.chi(model)) / abs(s.chi(model)))
    elapsed = time.perf_counter() - start
    report(7, "susceptibilities match density-matrix finite differences", worst < 1e-2 and elapsed < 600, f"3 circuits x 3 models, worst rel. dev {worst:.1e}, {elapsed:.0f}s")


def test_criterion_08_susceptibility_identities(h4_runs):
    h, psi0, _, runs = h4_runs
    worst = 0.0
    for alg in ALGORITHMS:
        lc = LayeredCircuit.build(runs[alg].circuit(), h.n_qubits)
        s = susceptibility(h, lc, psi0)
        L, n, n2 = lc.n_layers, lc.n_qubits, lc.timing.n_cnot
        tau, M = lc.timing.durations, lc.timing.cnot_targets
        dF = np.sum(tau[:, None] * s.fluct_F) / (L * n)
        dC = np.sum(tau[:, None] / 2 * s.fluct_Z) / (L * n)
        dD = np.sum(M[:, :, None] / 3 * s.fluct_P) / n2
        for chi, rebuilt in ((s.chi_F, L * n * dF), (s.chi_C, L * n * dC), (s.chi_D, n2 * dD)):
            worst = max(worst, abs(chi - rebuilt) / max(1.0, abs(chi)))
    report(8, "susceptibility identities from fluctuation tables", worst <= 1e-12, f"worst residual {worst:.1e}")


def _choi(channel):
    out = np.zeros((4, 4), dtype=complex)
    for i, j in itertools.product(range(2), repeat=2):
        e = np.zeros((2, 2), dtype=complex)
        e[i, j] = 1
        out += np.kron(e, apply_channel(channel, e))
    return out


def test_criterion_09_channel_correctness():
    ok, notes = True, []
    for ch in (AmplitudeDamping(0.3, 0), Dephasing(0.2, 0), Depolarizing(0.4, 0)):
        choi = _choi(ch)
        cp = np.linalg.eigvalsh(choi)[0] > -1e-12
        tp = np.allclose(np.einsum("ikjk->ij", choi.reshape(2, 2, 2, 2)), np.eye(2))
        ok &= cp and tp
        notes.append(f"{type(ch).__name__}: CP={cp} TP={tp}")
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(5):
        psi = random_state(3, rng)
        rho = np.outer(psi, psi.conj())
        for r in range(3):
            step = 1e-7
            fd = (apply_channel(AmplitudeDamping(step, r), rho) - rho) / step
            analytic = apply_channel(DampingDerivative(r), rho) - rho
            worst = max(worst, np.abs(fd - analytic).max())
    ok &= worst < 1e-6
    report(9, "channels are CPTP; derivative map matches finite difference", ok, "; ".join(notes) + f"; dF max dev {worst:.1e}")


def test_criterion_10_accounting(h2):
    pool = build_pool("qeb", 4)
    c = Counters()
    select_standard(pool.ids, TableLoss(-np.arange(1.0, 10.0)), c)
    ok = (c.loss_function_calls, c.loss_expectation_evals) == (9, 10)
    losses = [-1.0, -2.0, -0.5, -0.2, -0.1, -0.3, -5.0, -0.4, -0.6]
    c = Counters()
    subpool_exploration(pool, pool.ids, TableLoss(losses), [5], SUPPORT, c)
    # subpools {5}, {1,2,3,4,6,7,8}, {0}: (1+1) + (7+1) + (1+1)
    ok &= c.loss_expectation_evals == 12 and c.subpools_searched == [3]
    h, psi, _ = h2
    circ = AnsatzCircuit([pool[6], pool[1], pool[4]], [0.0] * 3)
    c = Counters()
    optimize_circuit(h, circ, psi, [0.0] * 3, OptimizerSettings(), c)
    res = bfgs_minimize(
        lambda x: energy_and_gradient(h, circ, psi, x)[0], lambda x: energy_and_gradient(h, circ, psi, x)[1], [0.0] * 3, OptimizerSettings()
    )
    ok &= c.optimizer_expectation_evals == res.n_objective + 4 * res.n_gradient
    report(10, "loss and optimizer accounting match hand traces", ok, f"optimizer evals {c.optimizer_expectation_evals}")


def test_criterion_11_variance(h2):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 6))
        h = QubitHamiltonian(n, [(float(rng.normal()), PauliString.from_label("".join(rng.choice(list("IXYZ"), n)))) for _ in range(12)])
        mat = h.to_matrix()
        psi = random_state(n, rng)
        mix = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
        rho = mix @ mix.conj().T
        rho /= np.trace(rho)
        for state, dens in ((psi, np.outer(psi, psi.conj())), (rho, rho)):
            oracle = np.trace(mat @ mat @ dens).real - np.trace(mat @ dens).real ** 2
            worst = max(worst, abs(variance(h, state) - oracle))
    h, psi0, efci = h2
    rec = run_algorithm(h, psi0, RunConfig(), efci)
    final_var = rec.iterations[-1].variance
    report(11, "variance matches dense oracle; converged H2 is near an eigenstate", worst < 1e-9 and final_var < 1e-6, f"max dev {worst:.1e}, H2 Var={final_var:.1e}")


def test_criterion_12_determinism(tmp_path):
    (tmp_path / "exp.ini").write_text("[input]\nmolecule = h4\n[run]\nalgorithm = explore,dynamic\nseed = 3\nthreads = 1\n")
    blobs = []
    for name in ("a", "b"):
        assert cli.main(["run", str(tmp_path / "exp.ini"), "--output", str(tmp_path / name)]) == 0
        files = sorted(p for p in (tmp_path / name).rglob("*") if p.is_file())
        blobs.append({str(p.relative_to(tmp_path / name)): p.read_bytes() for p in files})
    report(12, "seeded single-thread runs give byte-identical artifacts", blobs[0] == blobs[1] and len(blobs[0]) == 5, f"{len(blobs[0])} files compared")
