"""Command-line harness: ``run``, ``compare``, ``pool-info`` and ``susceptibility``.

Configuration files are INI-style with the sections below; unknown sections
or keys are rejected.  Relative paths resolve against the config file.

.. code-block:: ini

    [input]
    fcidump = h4.fcidump        ; or: pauli = ham.txt, or: molecule = h4
    n_electrons = 4             ; optional; defaults to the FCIDUMP header
    reference = 0,1             ; optional occupied qubits for Pauli inputs
    schedule = gates.json       ; optional native-gate table

    [run]
    algorithm = dynamic         ; standard | explore | static | dynamic | all | comma list
    pool = qeb
    relation = support
    selection = gradient
    epsilon = 1e-6
    l_max = 0
    n_max =
    t_max = 100
    initial_subpool_size = 1
    seed = 0
    support_sizes = 2,4
    threads = 1

    [optimizer]
    gtol = 1e-12
    xrtol = 0
    maxiter =

    [noise]
    enabled = false
    t1 = 100e-6
    t2star = 100e-6
    p = 1e-3
    doubled_dephasing = false
    target = 1e-3

    [output]
    directory = out
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .adapt import ALGORITHMS, RunConfig, RunRecord, run_algorithm
from .errors import AdaptLayerError, ConfigError, OptimizerError, ParseError, ResourceError, ValidationError
from .hamiltonian import exact_ground_energy, hartree_fock_state, jordan_wigner, load_molecule, parse_fcidump
from .layout import GateSchedule
from .noise_analysis import LayeredCircuit, NoiseSpec, fidelity_requirements, susceptibility
from .optimize import OptimizerSettings
from .pauli import QubitHamiltonian, parse_pauli_hamiltonian
from .pools import build_pool, noncommuting_set_cardinality, pool_cardinality, qeb_operator_cardinality, relation_from_tag

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_RESOURCE = 4
EXIT_OPTIMIZER = 5

THREADS_ENV = "ADAPTLAYER_THREADS"
THRESHOLDS = (1e-1, 1e-2, 1.6e-3, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9)

ITERATION_COLUMNS = (
    "t",
    "bound",
    "error",
    "params",
    "depth_element_layers",
    "driver_layers",
    "depth_columns",
    "duration_s",
    "n_cnot",
    "loss_calls",
    "loss_evals",
    "opt_calls",
    "opt_evals",
    "var_h",
    "accepted",
    "added",
)
SUSCEPTIBILITY_COLUMNS = ("t", "params", "chi_F", "chi_C", "chi_D", "depth_element_layers", "n_cnot", "depth_columns", "duration_s")

_SCHEMA = {
    "input": {"fcidump", "pauli", "molecule", "n_electrons", "reference", "schedule"},
    "run": {
        "algorithm",
        "pool",
        "relation",
        "selection",
        "epsilon",
        "l_max",
        "n_max",
        "t_max",
        "initial_subpool_size",
        "seed",
        "support_sizes",
        "threads",
    },
    "optimizer": {"gtol", "xrtol", "maxiter"},
    "noise": {"enabled", "t1", "t2star", "p", "doubled_dephasing", "target"},
    "output": {"directory"},
}


def fmt(x) -> str:
    """Lossless text for CSV cells; ``None`` becomes an empty cell."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# --- configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    input_kind: str
    input_value: str
    n_electrons: int | None = None
    reference: tuple[int, ...] | None = None
    schedule_path: Path | None = None
    algorithms: tuple[str, ...] = ("standard",)
    run: RunConfig = field(default_factory=RunConfig)
    noise: NoiseSpec | None = None
    noise_target: float = 1e-3
    output: Path = Path("out")


def _opt_int(v: str | None) -> int | None:
    return None if v is None or v.strip() == "" else int(v)


def _int_list(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


def load_config(path: str | Path, threads: int | None = None) -> ExperimentConfig:
    """Parse and validate an experiment file.

    Raises:
        ConfigError: Unknown section/key, bad value, or not exactly one input.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - _SCHEMA[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")

    base = path.parent
    inp = parser["input"] if parser.has_section("input") else {}
    sources = [k for k in ("fcidump", "pauli", "molecule") if inp.get(k)]
    if len(sources) != 1:
        raise ConfigError("exactly one of fcidump, pauli or molecule must be given in [input]")
    kind = sources[0]
    value = inp[kind] if kind == "molecule" else str(base / inp[kind])

    def section(name):
        return parser[name] if parser.has_section(name) else {}

    run, opt, noise, out = section("run"), section("optimizer"), section("noise"), section("output")
    try:
        algo = run.get("algorithm", "standard").strip()
        algorithms = ALGORITHMS if algo == "all" else tuple(a.strip() for a in algo.split(",") if a.strip())
        if not algorithms:
            raise ConfigError("no algorithm selected")
        for a in algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        env_threads = os.environ.get(THREADS_ENV)
        n_threads = threads if threads is not None else int(run.get("threads") or env_threads or 1)
        rc = RunConfig(
            pool=run.get("pool", "qeb"),
            relation=run.get("relation", "support"),
            algorithm=algorithms[0],
            selection=run.get("selection", "gradient"),
            epsilon=float(run.get("epsilon", 1e-6)),
            l_max=float(run.get("l_max", 0.0)),
            n_max=_opt_int(run.get("n_max")),
            t_max=int(run.get("t_max", 100)),
            optimizer=OptimizerSettings(
                gtol=float(opt.get("gtol", 1e-12)),
                xrtol=float(opt.get("xrtol", 0.0)),
                maxiter=_opt_int(opt.get("maxiter")),
            ),
            initial_subpool_size=int(run.get("initial_subpool_size", 1)),
            seed=int(run.get("seed", 0)),
            threads=n_threads,
            support_sizes=_int_list(run.get("support_sizes", "2,4")),
        )
        rc.validate()
        spec = None
        if noise and _bool(noise.get("enabled", "false")):
            spec = NoiseSpec.from_coherence_times(
                float(noise.get("t1", 100e-6)),
                float(noise.get("t2star", 100e-6)),
                float(noise.get("p", 1e-3)),
                _bool(noise.get("doubled_dephasing", "false")),
            )
        return ExperimentConfig(
            input_kind=kind,
            input_value=value,
            n_electrons=_opt_int(inp.get("n_electrons")),
            reference=_int_list(inp["reference"]) if inp.get("reference") else None,
            schedule_path=base / inp["schedule"] if inp.get("schedule") else None,
            algorithms=tuple(algorithms),
            run=rc,
            noise=spec,
            noise_target=float(noise.get("target", 1e-3)) if noise else 1e-3,
            output=base / out.get("directory", "out"),
        )
    except ConfigError:
        raise
    except (ValueError, ValidationError) as exc:
        raise ConfigError(str(exc)) from exc


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


# --- problem setup ---------------------------------------------------------------


@dataclass
class Problem:
    hamiltonian: QubitHamiltonian
    psi0: np.ndarray
    reference_energy: float
    n_electrons: int | None


def _basis_state(n: int, occupied: Sequence[int]) -> np.ndarray:
    idx = 0
    for q in occupied:
        if not 0 <= q < n:
            raise ConfigError(f"reference qubit {q} out of range for {n} qubits")
        idx |= 1 << q
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[idx] = 1.0
    return psi


def build_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.input_kind == "molecule":
        _, ints, _ = load_molecule(cfg.input_value)
        h, ne = jordan_wigner(ints), ints.n_electrons
    elif cfg.input_kind == "fcidump":
        ints = parse_fcidump(_read(cfg.input_value))
        h, ne = jordan_wigner(ints), ints.n_electrons
    else:
        h, ne = parse_pauli_hamiltonian(_read(cfg.input_value)), None
    if cfg.n_electrons is not None:
        ne = cfg.n_electrons
    n = h.n_qubits
    if cfg.reference is not None:
        psi0 = _basis_state(n, cfg.reference)
    elif ne is not None:
        psi0 = hartree_fock_state(n, ne)
    else:
        psi0 = _basis_state(n, ())
    return Problem(h, psi0, exact_ground_energy(h, ne), ne)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read input {path}: {exc}") from exc


def problem_from_record(record: RunRecord) -> tuple[QubitHamiltonian, np.ndarray]:
    if record.hamiltonian_text is None or record.reference_state is None:
        raise ValidationError("record does not embed its Hamiltonian and reference state")
    h = parse_pauli_hamiltonian(record.hamiltonian_text, record.n_qubits)
    if h.content_hash() != record.hamiltonian_hash:
        raise ValidationError("embedded Hamiltonian does not match the recorded hash")
    return h, _basis_state(record.n_qubits, [q for q in range(record.n_qubits) if record.reference_state[0] >> q & 1])


# --- artifacts -------------------------------------------------------------------


def iterations_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ITERATION_COLUMNS)
    for it in record.iterations:
        c = it.counters
        w.writerow(
            fmt(v)
            for v in (
                it.t,
                it.bound,
                it.error,
                it.n_params,
                it.depth_element_layers,
                it.driver_layers,
                it.depth_columns,
                it.duration_s,
                it.n_cnot,
                c["loss_function_calls"],
                c["loss_expectation_evals"],
                c["optimizer_calls"],
                c["optimizer_expectation_evals"],
                it.variance,
                it.accepted,
                " ".join(str(i) for i in it.added),
            )
        )
    return buf.getvalue()


def susceptibility_rows(record: RunRecord, h: QubitHamiltonian, psi0: np.ndarray, schedule: GateSchedule | None = None):
    """One susceptibility result per logged iteration with a non-empty circuit."""
    pool = build_pool(record.config["pool"], record.n_qubits, tuple(record.config["support_sizes"]))
    out = []
    for it in record.iterations:
        if not it.element_ids:
            continue
        circ = RunRecord.circuit_from_iteration(it, pool)
        lc = LayeredCircuit.build(circ, record.n_qubits, schedule)
        out.append((it, lc, susceptibility(h, lc, psi0)))
    return out


def susceptibility_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUSCEPTIBILITY_COLUMNS)
    for it, lc, s in rows:
        w.writerow(
            fmt(v)
            for v in (it.t, it.n_params, s.chi_F, s.chi_C, s.chi_D, lc.n_layers, s.n_cnot, lc.timing.column_depth, lc.timing.total_duration)
        )
    return buf.getvalue()


def fidelity_report(rows, target: float, noise: NoiseSpec | None = None) -> dict:
    it, lc, s = rows[-1]
    req = fidelity_requirements(s.chi_F, s.chi_C, s.chi_D, target)
    report = {"t": it.t, "target_Ha": target, "susceptibility": s.to_dict(), "requirements": req.to_dict()}
    if noise is not None:
        report["predicted_error_Ha"] = {
            "damping": s.chi_F * noise.omega1,
            "dephasing": s.chi_C * noise.omegaz,
            "depolarizing": s.chi_D * noise.p,
        }
    return report


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False, default=float) + "\n"


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Run every configured algorithm and write its artifacts."""
    problem = build_problem(cfg)
    schedule = GateSchedule.from_json(_read(str(cfg.schedule_path))) if cfg.schedule_path else None
    text = problem.hamiltonian.to_text()
    records = []
    for alg in cfg.algorithms:
        rc = replace(cfg.run, algorithm=alg)
        try:
            rec = run_algorithm(problem.hamiltonian, problem.psi0, rc, problem.reference_energy, schedule=schedule)
        except OptimizerError as exc:
            partial = getattr(exc, "partial_record", None)
            if partial is not None:
                partial.hamiltonian_text = text
                partial.halt_reason = f"optimizer failure: {exc}"
                _write(_out_dir(cfg, alg) / "run_record.json", partial.to_json() + "\n")
            raise
        rec.hamiltonian_text = text
        out = _out_dir(cfg, alg)
        _write(out / "run_record.json", rec.to_json() + "\n")
        _write(out / "iterations.csv", iterations_csv(rec))
        if cfg.noise is not None:
            rows = susceptibility_rows(rec, problem.hamiltonian, problem.psi0, schedule)
            _write(out / "susceptibility.csv", susceptibility_csv(rows))
            if rows:
                _write(out / "fidelity.json", _dump_json(fidelity_report(rows, cfg.noise_target, cfg.noise)))
        records.append(rec)
    if len(records) > 1:
        _write(cfg.output / "comparison.csv", comparison_csv(compare_runs(records)))
    return records


def _out_dir(cfg: ExperimentConfig, alg: str) -> Path:
    return cfg.output / alg if len(cfg.algorithms) > 1 else cfg.output


# --- comparison -------------------------------------------------------------------

_METRICS = ("total_evals", "loss_evals", "opt_evals", "opt_calls", "params", "depth_element_layers", "depth_columns")


def _first_reaching(record: RunRecord, threshold: float):
    for it in record.iterations:
        if it.error is not None and it.error < threshold:
            c = it.counters
            return {
                "total_evals": c["loss_expectation_evals"] + c["optimizer_expectation_evals"],
                "loss_evals": c["loss_expectation_evals"],
                "opt_evals": c["optimizer_expectation_evals"],
                "opt_calls": c["optimizer_calls"],
                "params": it.n_params,
                "depth_element_layers": it.depth_element_layers,
                "depth_columns": it.depth_columns,
            }
    return None


def compare_runs(records: Sequence[RunRecord], labels: Sequence[str] | None = None) -> list[dict]:
    """Cost to first reach each accuracy threshold, one row per (threshold, record).

    Ratio columns divide by the first record's value at the same threshold;
    cells stay empty when either record never reaches the threshold.

    Raises:
        ValidationError: Fewer than two records or different Hamiltonians.
    """
    if len(records) < 2:
        raise ValidationError("compare needs at least two records")
    if len({r.hamiltonian_hash for r in records}) != 1:
        raise ValidationError("records were produced for different Hamiltonians")
    labels = list(labels) if labels is not None else [r.algorithm for r in records]
    rows = []
    for thr in THRESHOLDS:
        hits = [_first_reaching(r, thr) for r in records]
        base = hits[0]
        for k, hit in enumerate(hits):
            row = {"threshold": thr, "record": k, "label": labels[k]}
            for m in _METRICS:
                row[m] = None if hit is None else hit[m]
            for m in _METRICS:
                v, b = row[m], None if base is None else base[m]
                row[f"{m}_ratio"] = v / b if v is not None and b else None
            rows.append(row)
    return rows


def comparison_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0])
    w.writerow(keys)
    for row in rows:
        w.writerow(fmt(row[k]) for k in keys)
    return buf.getvalue()


# --- entry points -----------------------------------------------------------------


def _cmd_run(args) -> int:
    cfg = load_config(args.config, threads=args.threads)
    if args.algorithm:
        algos = ALGORITHMS if args.algorithm == "all" else tuple(a for a in args.algorithm.split(",") if a)
        for a in algos:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        cfg.algorithms = tuple(algos)
    if args.output:
        cfg.output = Path(args.output)
    for rec in run_experiment(cfg):
        err = rec.final_error
        print(f"{rec.algorithm}: iterations={len(rec.iterations)} bound={fmt(rec.final_bound)} error={fmt(err)} halt={rec.halt_reason}")
    return EXIT_OK


def _load_record(path: str) -> RunRecord:
    try:
        return RunRecord.from_json(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read record {path}: {exc}") from exc
    except (json.JSONDecodeError, TypeError, KeyError) as exc:
        raise ParseError(f"{path}: not a run record ({exc})") from exc


def _cmd_compare(args) -> int:
    records = [_load_record(p) for p in args.records]
    text = comparison_csv(compare_runs(records, [f"{r.algorithm}:{p}" for r, p in zip(records, args.records)]))
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_pool_info(args) -> int:
    pool = build_pool(args.kind, args.n, tuple(args.sizes))
    print(f"kind={args.kind} n_qubits={args.n} support_sizes={','.join(map(str, args.sizes))}")
    print(f"pool_size={len(pool)} closed_form={pool_cardinality(args.kind, args.n, tuple(args.sizes))}")
    relations = ["operator"] if args.kind == "fermionic" else ["support", "operator"]
    for tag in relations:
        rel = relation_from_tag(tag)
        adj = pool.noncommuting_matrix(rel)
        for q in args.sizes:
            rows = [e.id for e in pool if e.order == q]
            if not rows:
                continue
            sizes = sorted({int(adj[i].sum()) for i in rows})
            closed = "" if args.kind == "fermionic" else noncommuting_set_cardinality(args.kind, tag, q, args.n, tuple(args.sizes))
            line = f"relation={tag} q={q} noncommuting_set_sizes={','.join(map(str, sizes))} closed_form={closed}"
            if args.kind == "qeb" and tag == "operator" and tuple(args.sizes) == (2, 4):
                line += f" exact_form={qeb_operator_cardinality(q, args.n)}"
            print(line)
    if args.list:
        for e in pool:
            print(f"{e.id}\t{e.label()}")
    return EXIT_OK


def _cmd_susceptibility(args) -> int:
    rec = _load_record(args.record)
    h, psi0 = problem_from_record(rec)
    schedule = GateSchedule.from_json(Path(args.schedule).read_text()) if args.schedule else None
    rows = susceptibility_rows(rec, h, psi0, schedule)
    if args.last:
        rows = rows[-1:]
    out = Path(args.output) if args.output else Path(args.record).parent
    _write(out / "susceptibility.csv", susceptibility_csv(rows))
    noise = None
    if args.t1 is not None and args.t2star is not None:
        noise = NoiseSpec.from_coherence_times(args.t1, args.t2star, args.p or 0.0, args.doubled_dephasing)
    if rows:
        report = fidelity_report(rows, args.target, noise)
        _write(out / "fidelity.json", _dump_json(report))
        r = report["requirements"]
        print(f"T1 >~ {fmt(r['T1_min_s'])} s, T2* >~ {fmt(r['T2star_min_s'])} s, p <~ {fmt(r['p_max'])}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptlayer", description="Layered ADAPT-VQE experiments on exact simulators.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one or more drivers from a config file")
    r.add_argument("config")
    r.add_argument("--algorithm", help="override: standard, explore, static, dynamic, all or a comma list")
    r.add_argument("--threads", type=int, help=f"loss-evaluation threads (default from ${THREADS_ENV} or 1)")
    r.add_argument("--output", help="override the output directory")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("compare", help="tabulate cost to reach accuracy thresholds")
    c.add_argument("records", nargs="+")
    c.add_argument("--output")
    c.set_defaults(func=_cmd_compare)

    pi = sub.add_parser("pool-info", help="pool and non-commuting-set sizes")
    pi.add_argument("--kind", required=True, choices=("qeb", "qubit", "fermionic"))
    pi.add_argument("--n", type=int, required=True)
    pi.add_argument("--sizes", type=int, nargs="+", default=[2, 4])
    pi.add_argument("--list", action="store_true", help="also list every element")
    pi.set_defaults(func=_cmd_pool_info)

    s = sub.add_parser("susceptibility", help="noise susceptibilities of a recorded run")
    s.add_argument("record")
    s.add_argument("--output")
    s.add_argument("--schedule")
    s.add_argument("--last", action="store_true", help="only the final circuit")
    s.add_argument("--target", type=float, default=1e-3)
    s.add_argument("--t1", type=float)
    s.add_argument("--t2star", type=float)
    s.add_argument("--p", type=float)
    s.add_argument("--doubled-dephasing", action="store_true")
    s.set_defaults(func=_cmd_susceptibility)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, f"configuration error: {exc}"
    except ParseError as exc:
        code, msg = EXIT_PARSE, f"input error: {exc}"
    except ResourceError as exc:
        code, msg = EXIT_RESOURCE, f"resource limit: {exc}"
    except OptimizerError as exc:
        code, msg = EXIT_OPTIMIZER, f"optimizer failure: {exc}"
    except AdaptLayerError as exc:
        code, msg = EXIT_ERROR, f"error: {exc}"
    print(msg, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
