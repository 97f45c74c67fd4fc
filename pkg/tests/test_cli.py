from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import pytest

from adaptlayer import cli
from adaptlayer.adapt import RunRecord
from adaptlayer.errors import ConfigError, OptimizerError

TWO_TERM = "1.0 Z0\n0.5 X0 X1\n"


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def pauli_config(tmp_path, extra_run="", ham=TWO_TERM):
    write(tmp_path / "ham.txt", ham)
    return write(
        tmp_path / "exp.ini",
        f"[input]\npauli = ham.txt\n\n[run]\npool = qubit\nsupport_sizes = 2\nepsilon = 1e-8\n{extra_run}\n[output]\ndirectory = out\n",
    )


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_minimal_pauli_run(tmp_path):
    cfg = pauli_config(tmp_path)
    assert cli.main(["run", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "iterations.csv")
    assert rows and tuple(rows[0]) == cli.ITERATION_COLUMNS
    assert float(rows[-1]["error"]) < 1e-8
    rec = RunRecord.from_json((tmp_path / "out" / "run_record.json").read_text())
    assert rec.reference_energy == pytest.approx(-(1.25**0.5))


def test_same_seed_gives_identical_artifacts(tmp_path):
    cfg = pauli_config(tmp_path, "algorithm = all\nseed = 5\nthreads = 1\n")
    outs = []
    for name in ("a", "b"):
        assert cli.main(["run", str(cfg), "--output", str(tmp_path / name)]) == 0
        outs.append({p.relative_to(tmp_path / name): p.read_bytes() for p in sorted((tmp_path / name).rglob("*")) if p.is_file()})
    assert outs[0] == outs[1]
    assert len(outs[0]) == 4 * 2 + 1


def test_thread_count_does_not_change_results(tmp_path, monkeypatch):
    spec = resources.files("adaptlayer").joinpath("data", "h2_sto3g.fcidump").read_text()
    write(tmp_path / "h2.fcidump", spec)
    cfg = write(tmp_path / "exp.ini", "[input]\nfcidump = h2.fcidump\n[run]\nalgorithm = explore\n")
    assert cli.main(["run", str(cfg), "--output", str(tmp_path / "one"), "--threads", "1"]) == 0
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.load_config(cfg).run.threads == 3
    assert cli.main(["run", str(cfg), "--output", str(tmp_path / "three")]) == 0
    a = (tmp_path / "one" / "iterations.csv").read_bytes()
    b = (tmp_path / "three" / "iterations.csv").read_bytes()
    assert a == b


def test_all_algorithms_on_h2(tmp_path):
    cfg = write(tmp_path / "exp.ini", "[input]\nmolecule = h2\n[run]\nalgorithm = all\n[noise]\nenabled = true\n")
    assert cli.main(["run", str(cfg)]) == 0
    for alg in ("standard", "explore", "static", "dynamic"):
        rec = RunRecord.from_json((tmp_path / "out" / alg / "run_record.json").read_text())
        assert rec.final_error < 1.6e-3
        sus = read_csv(tmp_path / "out" / alg / "susceptibility.csv")
        assert sus and float(sus[-1]["chi_D"]) > 0
        report = json.loads((tmp_path / "out" / alg / "fidelity.json").read_text())
        assert report["requirements"]["p_max"] > 0
    assert (tmp_path / "out" / "comparison.csv").exists()


def test_compare_self_gives_unit_ratios(tmp_path):
    cfg = pauli_config(tmp_path)
    cli.main(["run", str(cfg)])
    rec = tmp_path / "out" / "run_record.json"
    out = tmp_path / "cmp.csv"
    assert cli.main(["compare", str(rec), str(rec), "--output", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 2 * len(cli.THRESHOLDS)
    reached = [r for r in rows if r["total_evals"]]
    assert reached
    for r in reached:
        for k, v in r.items():
            if k.endswith("_ratio") and v:
                assert float(v) == 1.0


def test_compare_unreached_thresholds_are_empty():
    rec = RunRecord("standard", {}, 2, "h", 0.0, -1.0)
    rows = cli.compare_runs([rec, rec])
    assert all(r["params"] is None and r["params_ratio"] is None for r in rows)


def test_compare_rejects_different_hamiltonians(tmp_path):
    cfg = pauli_config(tmp_path)
    cli.main(["run", str(cfg)])
    first = tmp_path / "first.json"
    first.write_text((tmp_path / "out" / "run_record.json").read_text())
    write(tmp_path / "ham.txt", "1.0 Z0\n0.25 X0 X1\n")
    cli.main(["run", str(cfg)])
    assert cli.main(["compare", str(first), str(tmp_path / "out" / "run_record.json")]) == cli.EXIT_ERROR


def test_susceptibility_command(tmp_path):
    cfg = write(tmp_path / "exp.ini", "[input]\nmolecule = h2\n[run]\nalgorithm = dynamic\n")
    cli.main(["run", str(cfg)])
    rec = tmp_path / "out" / "run_record.json"
    assert cli.main(["susceptibility", str(rec), "--t1", "1e-4", "--t2star", "1e-4", "--p", "1e-3"]) == 0
    rows = read_csv(tmp_path / "out" / "susceptibility.csv")
    assert tuple(rows[0]) == cli.SUSCEPTIBILITY_COLUMNS
    report = json.loads((tmp_path / "out" / "fidelity.json").read_text())
    assert report["predicted_error_Ha"]["depolarizing"] == pytest.approx(1e-3 * float(rows[-1]["chi_D"]))


def test_pool_info(capsys):
    assert cli.main(["pool-info", "--kind", "qeb", "--n", "6"]) == 0
    out = capsys.readouterr().out
    assert "pool_size=60 closed_form=60" in out
    for line in out.splitlines():
        if line.startswith("relation="):
            sizes = line.split("noncommuting_set_sizes=")[1].split()[0]
            key = "exact_form=" if "exact_form=" in line else "closed_form="
            assert sizes == line.split(key)[1].split()[0]
    assert "relation=operator q=2 noncommuting_set_sizes=44 closed_form=50 exact_form=44" in out


# --- configuration and exit codes ---------------------------------------------------


@pytest.mark.parametrize(
    "text",
    [
        "[input]\nmolecule = h2\n[run]\nbogus = 1\n",
        "[input]\nmolecule = h2\n[extras]\nx = 1\n",
        "[input]\nmolecule = h2\npauli = x.txt\n",
        "[input]\n",
        "[input]\nmolecule = h2\n[run]\nepsilon = -1\n",
        "[input]\nmolecule = h2\n[run]\nalgorithm = greedy\n",
        "[input]\nmolecule = h2\n[run]\nt_max = many\n",
        "[input]\nmolecule = h2\n[noise]\nenabled = perhaps\n",
    ],
)
def test_bad_configs_exit_2(tmp_path, text):
    cfg = write(tmp_path / "bad.ini", text)
    with pytest.raises(ConfigError):
        cli.load_config(cfg)
    assert cli.main(["run", str(cfg)]) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(["run", str(tmp_path / "none.ini")]) == cli.EXIT_CONFIG


def test_parse_error_exit_3(tmp_path):
    cfg = pauli_config(tmp_path, ham="1.0 Q0\n")
    assert cli.main(["run", str(cfg)]) == cli.EXIT_PARSE


def test_resource_error_exit_4(tmp_path):
    cfg = pauli_config(tmp_path, ham="1.0 Z16\n")
    assert cli.main(["run", str(cfg)]) == cli.EXIT_RESOURCE


def test_optimizer_error_exit_5(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise OptimizerError("line search produced NaN")

    monkeypatch.setattr(cli, "run_algorithm", boom)
    assert cli.main(["run", str(pauli_config(tmp_path))]) == cli.EXIT_OPTIMIZER


def test_fmt_is_lossless():
    x = 0.1 + 0.2
    assert float(cli.fmt(x)) == x
    assert cli.fmt(None) == "" and cli.fmt(True) == "1" and cli.fmt(3) == "3"
