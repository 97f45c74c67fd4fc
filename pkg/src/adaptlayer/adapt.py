"""ADAPT-VQE drivers: standard, explore, static-layered and dynamic-layered.

All drivers grow circuits noiselessly on exact statevectors.  Expectation
value bookkeeping follows two rules: scoring a subpool ``S`` costs
``|S| + 1`` evaluations, and one optimizer gradient over ``P`` parameters
costs ``P + 1``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, OptimizerError, ValidationError
from .layout import GateSchedule, cnot_accounting, decompose_into_layers
from .optimize import OptimizerSettings, bfgs_minimize
from .pauli import QubitHamiltonian, expectation, variance
from .pools import AnsatzElement, CommutationRelation, Pool, build_pool, relation_from_tag
from .simulator import AnsatzCircuit, apply_element, energy_and_gradient, gradient_loss, run_circuit

ALGORITHMS = ("standard", "explore", "static", "dynamic")
SELECTIONS = ("gradient", "energy")
LOSS_TOL = 1e-12


@dataclass
class RunConfig:
    """Settings shared by every driver.

    Attributes:
        pool: Pool kind (``qeb``, ``qubit`` or ``fermionic``).
        relation: ``support`` or ``operator`` commutation.
        algorithm: One of :data:`ALGORITHMS`.
        selection: ``gradient`` loss or ``energy`` (1-D minimized energy) selection.
        epsilon: Energy accuracy per element in Hartree.
        l_max: Loss threshold for admitting an element into a layer.
        n_max: Maximum explorations per layer (``None`` = until the pool is drained).
        t_max: Maximum driver iterations.
        optimizer: BFGS tolerances.
        initial_subpool_size: Size of the random initial subpool.
        seed: Seed for initial-subpool draws.
        threads: Worker threads for batch loss evaluation.
    """

    pool: str = "qeb"
    relation: str = "support"
    algorithm: str = "standard"
    selection: str = "gradient"
    epsilon: float = 1e-6
    l_max: float = 0.0
    n_max: int | None = None
    t_max: int = 100
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    initial_subpool_size: int = 1
    seed: int = 0
    threads: int = 1
    support_sizes: tuple[int, ...] = (2, 4)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}")
        if self.relation not in ("support", "operator"):
            raise ConfigError("relation must be 'support' or 'operator'")
        if self.pool not in ("qeb", "qubit", "fermionic"):
            raise ConfigError(f"unknown pool kind {self.pool!r}")
        if self.pool == "fermionic" and self.relation == "support":
            raise ConfigError("support commutation is undefined for fermionic pools; use 'operator'")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.t_max < 1:
            raise ConfigError("t_max must be at least 1")
        if self.n_max is not None and self.n_max < 1:
            raise ConfigError("n_max must be positive")
        if self.initial_subpool_size < 1:
            raise ConfigError("initial_subpool_size must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["support_sizes"] = list(self.support_sizes)
        return d


@dataclass
class Counters:
    loss_function_calls: int = 0
    loss_expectation_evals: int = 0
    optimizer_calls: int = 0
    optimizer_expectation_evals: int = 0
    subpools_searched: list[int] = field(default_factory=list)
    searched_sizes: list[int] = field(default_factory=list)

    def snapshot(self) -> dict:
        return {
            "loss_function_calls": self.loss_function_calls,
            "loss_expectation_evals": self.loss_expectation_evals,
            "optimizer_calls": self.optimizer_calls,
            "optimizer_expectation_evals": self.optimizer_expectation_evals,
            "selections": len(self.subpools_searched),
        }


# --- losses ------------------------------------------------------------------


def energy_selection_loss(
    h: QubitHamiltonian, circuit: AnsatzCircuit, params: Sequence[float], e: AnsatzElement, psi0: np.ndarray
) -> float:
    """Lowest energy reachable by appending ``e`` and tuning only its angle.

    Every generator here satisfies ``T^3 = -T``, so the appended-angle energy
    is ``c0 + c1 cos 2θ + c2 sin 2θ`` and its minimum is ``c0 - hypot(c1, c2)``.
    """
    psi = run_circuit(circuit, psi0, params)
    return _energy_minimum(h, psi, expectation(h, psi), e)[0]


def _energy_minimum(h: QubitHamiltonian, psi: np.ndarray, e0: float, e: AnsatzElement) -> tuple[float, float]:
    plus = expectation(h, apply_element(e, np.pi / 4, psi))
    minus = expectation(h, apply_element(e, -np.pi / 4, psi))
    c0 = 0.5 * (plus + minus)
    c2 = 0.5 * (plus - minus)
    c1 = e0 - c0
    amp = float(np.hypot(c1, c2))
    theta = 0.5 * float(np.arctan2(-c2, -c1)) if amp > 0 else 0.0
    return c0 - amp, theta


class CachedLoss:
    """Loss values computed at most once per id, with batch evaluation and accounting."""

    evals_per_element = 1
    threads = 1

    def __init__(self):
        self.cache: dict[int, float] = {}

    def _one(self, i: int) -> float:
        raise NotImplementedError

    def score(self, ids: Iterable[int], counters: Counters | None = None) -> dict[int, float]:
        ids = list(ids)
        new = [i for i in dict.fromkeys(ids) if i not in self.cache]
        if new:
            if self.threads > 1 and len(new) > 1:
                with ThreadPoolExecutor(self.threads) as ex:
                    vals = list(ex.map(self._one, new))
            else:
                vals = [self._one(i) for i in new]
            self.cache.update(zip(new, (float(v) for v in vals)))
            if counters is not None:
                counters.loss_function_calls += len(new)
                counters.loss_expectation_evals += self.evals_per_element * len(new) + 1
        return {i: self.cache[i] for i in ids}

    def __getitem__(self, i: int) -> float:
        return self.cache[i] if i in self.cache else self.score([i])[i]


class TableLoss(CachedLoss):
    """Fixed loss per id, for synthetic experiments."""

    def __init__(self, values: Sequence[float] | dict[int, float]):
        super().__init__()
        self.values = values

    def _one(self, i: int) -> float:
        return self.values[i]


class LossFunction(CachedLoss):
    """Selection losses for a fixed circuit output state.

    For gradient selection the loss is ``-|dE/dθ|`` at zero angle.  For energy
    selection it is the achievable reduction ``min_θ E - E_current`` (so both
    rules share the ``loss < l_max`` gate with ``l_max = 0``).
    """

    def __init__(self, h: QubitHamiltonian, psi: np.ndarray, energy: float, pool: Pool, selection: str = "gradient", threads: int = 1):
        super().__init__()
        self.h = h
        self.psi = np.ascontiguousarray(psi, dtype=np.complex128)
        self.energy = float(energy)
        self.pool = pool
        self.selection = selection
        self.threads = threads
        self.evals_per_element = 1 if selection == "gradient" else 2
        self._hpsi = h.apply(self.psi) if selection == "gradient" else None

    def _one(self, i: int) -> float:
        e = self.pool[i]
        if self.selection == "gradient":
            return gradient_loss(self.h, self.psi, e, self._hpsi)
        return _energy_minimum(self.h, self.psi, self.energy, e)[0] - self.energy


def _argmin(values: dict[int, float]) -> int:
    return min(values, key=lambda i: (values[i], i))


# --- selection ---------------------------------------------------------------


def select_standard(ids: Sequence[int], loss: CachedLoss, counters: Counters | None = None) -> int:
    """Full-scan argmin; equal losses resolve to the lowest id."""
    if not ids:
        raise ValidationError("cannot select from an empty pool")
    vals = loss.score(sorted(ids), counters)
    if counters is not None:
        counters.subpools_searched.append(1)
        counters.searched_sizes.append(len(vals))
    return _argmin(vals)


def subpool_exploration(
    pool: Pool,
    remaining: Iterable[int],
    loss: CachedLoss,
    initial_subpool: Iterable[int],
    relation: CommutationRelation,
    counters: Counters | None = None,
) -> tuple[int, set[int]]:
    """Local search over successive non-commuting sets.

    Starting from ``initial_subpool`` the best element ``A_m`` of each subpool
    seeds the next subpool, its non-commuting set among unexplored remaining
    elements.  The search stops when the best loss no longer drops by more
    than ``LOSS_TOL`` or the next subpool is empty.

    Returns:
        The best element found (a local minimum over ``remaining``) and the
        set of all searched ids.
    """
    remaining = set(remaining)
    subpool = sorted(set(initial_subpool))
    if not subpool:
        raise ValidationError("initial subpool is empty")
    if not set(subpool) <= remaining:
        raise ValidationError("initial subpool must lie inside the remaining pool")
    adjacency = pool.noncommuting_matrix(relation)
    explored: set[int] = set()
    best, best_loss = -1, np.inf
    m = 0
    while subpool:
        vals = loss.score(subpool, counters)
        explored.update(subpool)
        m += 1
        cand = _argmin(vals)
        if best >= 0 and not vals[cand] < best_loss - LOSS_TOL:
            break
        best, best_loss = cand, vals[cand]
        row = adjacency[best]
        subpool = sorted(i for i in remaining - explored if row[i])
    if counters is not None:
        counters.subpools_searched.append(m)
        counters.searched_sizes.append(len(explored))
    return best, explored


def _draw_initial(rng: np.random.Generator, remaining: set[int], size: int) -> list[int]:
    ordered = sorted(remaining)
    k = min(size, len(ordered))
    return sorted(int(x) for x in rng.choice(ordered, size=k, replace=False))


def _reduce(pool: Pool, remaining: set[int], a: int, relation: CommutationRelation) -> None:
    row = pool.noncommuting_matrix(relation)[a]
    remaining.difference_update([i for i in remaining if row[i]])
    remaining.discard(a)


def build_static_layer(
    pool: Pool,
    loss: CachedLoss,
    l_max: float,
    n_max: int | None,
    relation: CommutationRelation,
    counters: Counters | None = None,
    rng: np.random.Generator | None = None,
    initial_size: int = 1,
    ids: Iterable[int] | None = None,
) -> list[int]:
    """Fill one layer by repeated exploration on a shrinking pool.

    Each explored winner joins the layer if its loss is below ``l_max``;
    whether or not it joins, it and its non-commuting set leave the pool.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    remaining = set(pool.ids if ids is None else ids)
    layer: list[int] = []
    n = 0
    while remaining and (n_max is None or n < n_max):
        a, _ = subpool_exploration(pool, remaining, loss, _draw_initial(rng, remaining, initial_size), relation, counters)
        if loss[a] < l_max - LOSS_TOL:
            layer.append(a)
        _reduce(pool, remaining, a, relation)
        n += 1
    return layer


# --- optimization ------------------------------------------------------------


def optimize_circuit(
    h: QubitHamiltonian,
    circuit: AnsatzCircuit,
    psi0: np.ndarray,
    x0: Sequence[float],
    settings: OptimizerSettings,
    counters: Counters | None = None,
) -> tuple[np.ndarray, float]:
    cache: dict[bytes, tuple[float, np.ndarray]] = {}

    def both(x):
        key = np.asarray(x, dtype=float).tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = energy_and_gradient(h, circuit, psi0, x)
        return cache[key]

    res = bfgs_minimize(lambda x: both(x)[0], lambda x: both(x)[1], x0, settings)
    if counters is not None:
        counters.optimizer_calls += 1
        counters.optimizer_expectation_evals += res.expectation_evals(len(x0))
    return res.x, res.fun


# --- records -----------------------------------------------------------------


@dataclass
class IterationRecord:
    t: int
    bound: float
    error: float | None
    n_params: int
    added: list[int]
    accepted: bool
    element_ids: list[int]
    parameters: list[float]
    provenance: list[int]
    depth_element_layers: int
    driver_layers: int
    depth_columns: int | None
    duration_s: float | None
    n_cnot: int | None
    variance: float
    counters: dict
    subpools_searched: list[int]
    searched_sizes: list[int]


@dataclass
class RunRecord:
    algorithm: str
    config: dict
    n_qubits: int
    hamiltonian_hash: str
    initial_energy: float
    reference_energy: float | None
    iterations: list[IterationRecord] = field(default_factory=list)
    halt_reason: str = ""
    hamiltonian_text: str | None = None
    reference_state: list[int] | None = None

    @property
    def final_bound(self) -> float:
        return self.iterations[-1].bound if self.iterations else self.initial_energy

    @property
    def final_error(self) -> float | None:
        if self.reference_energy is None:
            return None
        return self.final_bound - self.reference_energy

    def circuit(self, pool: Pool | None = None) -> AnsatzCircuit:
        """Final circuit, rebuilt from element ids."""
        pool = pool or build_pool(self.config["pool"], self.n_qubits, tuple(self.config["support_sizes"]))
        if not self.iterations:
            return AnsatzCircuit()
        return self.circuit_from_iteration(self.iterations[-1], pool)

    @staticmethod
    def circuit_from_iteration(it: IterationRecord, pool: Pool) -> AnsatzCircuit:
        return AnsatzCircuit([pool[i] for i in it.element_ids], list(it.parameters), list(it.provenance))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=_json_default)

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        its = [IterationRecord(**it) for it in d.get("iterations", [])]
        rest = {k: v for k, v in d.items() if k != "iterations"}
        return cls(iterations=its, **rest)

    @classmethod
    def from_json(cls, text: str) -> RunRecord:
        return cls.from_dict(json.loads(text))


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


# --- drivers -----------------------------------------------------------------


class _Run:
    def __init__(self, h, psi0, config: RunConfig, reference_energy, pool, schedule):
        config.validate()
        self.h = h
        self.psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
        if self.psi0.shape != (1 << h.n_qubits,):
            raise ValidationError("reference state does not match the Hamiltonian size")
        if abs(np.linalg.norm(self.psi0) - 1) > 1e-10:
            raise ValidationError("reference state is not normalized")
        self.config = config
        self.pool = pool or build_pool(config.pool, h.n_qubits, config.support_sizes)
        if self.pool.kind != config.pool or self.pool.n_qubits != h.n_qubits:
            raise ConfigError("supplied pool does not match the configuration")
        self.relation = relation_from_tag(config.relation)
        self.counters = Counters()
        self.rng = np.random.default_rng(config.seed)
        self.schedule = schedule if schedule is not None else GateSchedule.default()
        self.circuit = AnsatzCircuit()
        e0 = expectation(h, self.psi0)
        nz = np.flatnonzero(np.abs(self.psi0) > 1e-14)
        self.record = RunRecord(
            config.algorithm, config.to_dict(), h.n_qubits, h.content_hash(), e0, reference_energy,
            reference_state=[int(i) for i in nz] if len(nz) == 1 else None,
        )
        self.bound = e0
        self._selection_mark = 0

    def loss_for(self, circuit: AnsatzCircuit, energy: float) -> LossFunction:
        psi = run_circuit(circuit, self.psi0)
        return LossFunction(self.h, psi, energy, self.pool, self.config.selection, self.config.threads)

    def optimize(self, circuit: AnsatzCircuit) -> tuple[np.ndarray, float]:
        try:
            return optimize_circuit(self.h, circuit, self.psi0, circuit.parameters, self.config.optimizer, self.counters)
        except OptimizerError as exc:
            exc.partial_record = self.record
            raise

    def log(self, t: int, added: list[int], accepted: bool) -> IterationRecord:
        c = self.circuit
        psi = run_circuit(c, self.psi0)
        layers = decompose_into_layers(c, self.relation)
        try:
            timing = cnot_accounting(c, self.schedule, n_qubits=self.h.n_qubits)
            cols, dur, ncnot = timing.column_depth, timing.total_duration, timing.n_cnot
        except ValidationError:
            cols = dur = ncnot = None
        ref = self.record.reference_energy
        mark = self._selection_mark
        self._selection_mark = len(self.counters.subpools_searched)
        it = IterationRecord(
            t=t,
            bound=float(self.bound),
            error=None if ref is None else float(self.bound - ref),
            n_params=len(c),
            added=[int(i) for i in added],
            accepted=bool(accepted),
            element_ids=[e.id for e in c.elements],
            parameters=[float(x) for x in c.parameters],
            provenance=list(c.provenance),
            depth_element_layers=len(layers),
            driver_layers=len(set(c.provenance)),
            depth_columns=cols,
            duration_s=dur,
            n_cnot=ncnot,
            variance=variance(self.h, psi),
            counters=self.counters.snapshot(),
            subpools_searched=list(self.counters.subpools_searched[mark:]),
            searched_sizes=list(self.counters.searched_sizes[mark:]),
        )
        self.record.iterations.append(it)
        return it


def adapt_vqe(
    h: QubitHamiltonian,
    psi0: np.ndarray,
    config: RunConfig,
    reference_energy: float | None = None,
    pool: Pool | None = None,
    schedule: GateSchedule | None = None,
) -> RunRecord:
    """Grow a circuit one element at a time (``standard`` scans the pool, ``explore`` searches subpools)."""
    if config.algorithm not in ("standard", "explore"):
        raise ConfigError(f"adapt_vqe runs 'standard' or 'explore', not {config.algorithm!r}")
    run = _Run(h, psi0, config, reference_energy, pool, schedule)
    all_ids = run.pool.ids
    for t in range(1, config.t_max + 1):
        loss = run.loss_for(run.circuit, run.bound)
        if config.algorithm == "standard":
            a = select_standard(all_ids, loss, run.counters)
        else:
            init = _draw_initial(run.rng, set(all_ids), config.initial_subpool_size)
            a, _ = subpool_exploration(run.pool, all_ids, loss, init, run.relation, run.counters)
        trial = run.circuit.extended([run.pool[a]], t)
        x, energy = run.optimize(trial)
        run.circuit = trial.with_parameters(x)
        previous, run.bound = run.bound, energy
        gain = previous - energy
        run.log(t, [a], gain >= config.epsilon)
        if gain < config.epsilon:
            run.record.halt_reason = "energy gain below epsilon"
            return run.record
    run.record.halt_reason = "t_max reached"
    return run.record


def static_adapt_vqe(
    h: QubitHamiltonian,
    psi0: np.ndarray,
    config: RunConfig,
    reference_energy: float | None = None,
    pool: Pool | None = None,
    schedule: GateSchedule | None = None,
) -> RunRecord:
    """Append one statically built layer per iteration, then re-optimize every parameter once."""
    run = _Run(h, psi0, config, reference_energy, pool, schedule)
    for t in range(1, config.t_max + 1):
        loss = run.loss_for(run.circuit, run.bound)
        layer = build_static_layer(
            run.pool, loss, config.l_max, config.n_max, run.relation, run.counters, run.rng, config.initial_subpool_size
        )
        if not layer:
            run.log(t, [], False)
            run.record.halt_reason = "empty layer"
            return run.record
        trial = run.circuit.extended([run.pool[i] for i in layer], t)
        x, energy = run.optimize(trial)
        run.circuit = AnsatzCircuit(trial.elements, list(x), trial.provenance)
        previous, run.bound = run.bound, energy
        gain = previous - energy
        ok = gain >= config.epsilon * len(layer)
        run.log(t, layer, ok)
        if not ok:
            run.record.halt_reason = "energy gain below epsilon per element"
            return run.record
    run.record.halt_reason = "t_max reached"
    return run.record


def build_dynamic_layer(
    h: QubitHamiltonian,
    psi0: np.ndarray,
    circuit: AnsatzCircuit,
    bound: float,
    pool: Pool,
    config: RunConfig,
    counters: Counters,
    rng: np.random.Generator,
    iteration: int = 0,
) -> tuple[list[int], AnsatzCircuit, float]:
    """Grow a layer element by element, re-optimizing after every candidate.

    A candidate joins only if the optimized energy improves the bound by at
    least ``epsilon``.  Whether it joins or not, it and its non-commuting set
    leave the remaining pool.

    Returns:
        Layer ids, the extended circuit with optimal parameters, and the
        updated bound.
    """
    relation = relation_from_tag(config.relation)
    remaining = set(pool.ids)
    layer: list[int] = []
    current = circuit
    loss = LossFunction(h, run_circuit(current, psi0), bound, pool, config.selection, config.threads)
    n = 0
    while remaining and (config.n_max is None or n < config.n_max):
        init = _draw_initial(rng, remaining, config.initial_subpool_size)
        a, _ = subpool_exploration(pool, remaining, loss, init, relation, counters)
        if loss[a] < config.l_max - LOSS_TOL:
            trial = current.extended([pool[a]], iteration)
            x, energy = optimize_circuit(h, trial, psi0, trial.parameters, config.optimizer, counters)
            if bound - energy >= config.epsilon:
                layer.append(a)
                current = AnsatzCircuit(trial.elements, list(x), trial.provenance)
                bound = energy
                loss = LossFunction(h, run_circuit(current, psi0), bound, pool, config.selection, config.threads)
        _reduce(pool, remaining, a, relation)
        n += 1
    return layer, current, bound


def dynamic_adapt_vqe(
    h: QubitHamiltonian,
    psi0: np.ndarray,
    config: RunConfig,
    reference_energy: float | None = None,
    pool: Pool | None = None,
    schedule: GateSchedule | None = None,
) -> RunRecord:
    """Iterate dynamic layers until one comes back empty."""
    run = _Run(h, psi0, config, reference_energy, pool, schedule)
    for t in range(1, config.t_max + 1):
        try:
            layer, circuit, bound = build_dynamic_layer(
                h, run.psi0, run.circuit, run.bound, run.pool, config, run.counters, run.rng, t
            )
        except OptimizerError as exc:
            exc.partial_record = run.record
            raise
        run.circuit, run.bound = circuit, bound
        run.log(t, layer, bool(layer))
        if not layer:
            run.record.halt_reason = "empty layer"
            return run.record
    run.record.halt_reason = "t_max reached"
    return run.record


def run_algorithm(
    h: QubitHamiltonian,
    psi0: np.ndarray,
    config: RunConfig,
    reference_energy: float | None = None,
    pool: Pool | None = None,
    schedule: GateSchedule | None = None,
) -> RunRecord:
    config.validate()
    if config.algorithm in ("standard", "explore"):
        return adapt_vqe(h, psi0, config, reference_energy, pool, schedule)
    if config.algorithm == "static":
        return static_adapt_vqe(h, psi0, config, reference_energy, pool, schedule)
    return dynamic_adapt_vqe(h, psi0, config, reference_energy, pool, schedule)
