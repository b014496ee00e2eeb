import csv
import json
import shutil
from pathlib import Path

import pytest
import yaml

from smoothmax.__main__ import main
from smoothmax.errors import ValidationError
from smoothmax.harness import (CSV_COLUMNS, EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, input_hash,
                               load_config, parse_config, run_experiment, summarize)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

QUADRATIC = {
    "kind": "saddle-pathwise",
    "field": {"domain": {"lower": [-1.0], "upper": [1.0]}, "mean": {"2": -0.5}, "terms": []},
    "lambdas": [25, 100, 400],
    "replicates": 1,
}

TRIG = {
    "domain": {"lower": [0.0], "upper": [1.0]},
    "terms": [{"frequency": [k], "phase": [ph], "law": "gaussian", "params": {"sd": 1.0}}
              for k in (1, 2) for ph in (0.0, -1.5707963267948966)],
}


def _write(tmp_path, cfg, name="c.yaml"):
    cfg = dict(cfg, output_dir=str(tmp_path / "out"))
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_quadratic_run(tmp_path, capsys):
    assert main(["run", str(_write(tmp_path, QUADRATIC))]) == EXIT_OK
    csv_path = Path(capsys.readouterr().out.split()[0])
    rows = {float(r["lambda"]): r for r in _rows(csv_path)}
    assert abs(float(rows[400.0]["ratio"]) - 1) <= 0.005
    assert csv_path.name.startswith("saddle-pathwise_")
    man = json.loads(csv_path.with_suffix(".manifest.json").read_text())
    assert man["kind"] == "saddle-pathwise" and len(man["input_hash"]) == 40


def test_unsorted_lambdas_exit_2_without_files(tmp_path):
    path = _write(tmp_path, dict(QUADRATIC, lambdas=[100, 25]))
    assert main(["run", str(path)]) == EXIT_VALIDATION
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("bad", [{"lambda": [1, 2]}, {"options": {"min_ess": 5}},
                                 {"quadrature": {"tolerance": 1e-8}}, {"replicates": 0}])
def test_unknown_keys_and_bad_values_are_errors(tmp_path, bad):
    path = _write(tmp_path, dict(QUADRATIC, **bad))
    assert main(["validate", str(path)]) == EXIT_VALIDATION


def test_runs_are_deterministic(tmp_path):
    cfg = {"kind": "corollary1", "field": TRIG, "lambdas": [1.0, 4.0], "replicates": 30, "seed": 3}
    path = _write(tmp_path, cfg)
    a = run_experiment(load_config(path))
    b = run_experiment(load_config(path))
    assert a.csv_path != b.csv_path
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
    for r in _rows(a.csv_path):
        assert float(r["rel_diff"]) <= 1e-6


def test_manifest_alone_reproduces_the_run(tmp_path):
    cfg = {"kind": "corollary1", "field": TRIG, "lambdas": [2.0], "replicates": 20, "seed": 4}
    first = run_experiment(load_config(_write(tmp_path, cfg)))
    moved = tmp_path / "elsewhere.json"
    shutil.copy(first.manifest_path, moved)
    again = run_experiment(load_config(moved))
    assert again.csv_path.read_bytes() == first.csv_path.read_bytes()
    m1 = json.loads(first.manifest_path.read_text())
    m2 = json.loads(again.manifest_path.read_text())
    assert m1["input_hash"] == m2["input_hash"]


def test_seed_override(tmp_path, capsys):
    cfg = {"kind": "corollary1", "field": TRIG, "lambdas": [2.0], "replicates": 10, "seed": 4}
    path = _write(tmp_path, cfg)
    assert load_config(path, seed=99).seed == 99
    assert input_hash(load_config(path, seed=99).raw) != input_hash(load_config(path).raw)
    assert main(["run", str(path), "--seed", "99"]) == EXIT_OK
    man = Path(capsys.readouterr().out.split()[1])
    assert json.loads(man.read_text())["seed"] == 99


def test_numeric_failure_exit_3_with_partial(tmp_path):
    cfg = {"kind": "theorem1", "field": TRIG, "lambdas": [200.0], "replicates": 5, "seed": 1}
    assert main(["run", str(_write(tmp_path, cfg))]) == EXIT_NUMERIC
    files = list((tmp_path / "out").iterdir())
    assert len(files) == 1 and files[0].name.endswith(".csv.partial")


def test_input_hash_is_git_blob_sha():
    # `git hash-object` of the bytes b'{}' is this digest
    assert input_hash({}) == "9e26dfeeb6e641a33dae4961196235bdb965b21b"


def test_summarize_mixed_kinds_and_corrupt_rows(tmp_path):
    out = tmp_path / "out"
    run_experiment(load_config(_write(tmp_path, QUADRATIC)))
    run_experiment(parse_config({"kind": "tauberian", "lambdas": [5.0, 10.0, 20.0],
                                 "output_dir": str(out)}))
    name = "theorem1_20260101T000000000000Z.csv"
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS["theorem1"])
        for lam, ratio in [(25, 0.7), (50, 0.85), (100, 0.93), (200, 0.97)]:
            w.writerow([lam, 1.0, 1.0, ratio, 0.01, 50, 1000, ratio - 0.05, ratio + 0.05])
        w.writerow(["oops", "1"])
    report = summarize(out).read_text()
    for kind in ("saddle-pathwise", "theorem1", "tauberian"):
        assert f"## {kind}" in report
    assert "abs(ratio-1) monotone in lambda: True" in report
    assert "skipped rows: 1" in report
    assert "**PASS**" in report


def test_summarize_empty_directory(tmp_path):
    with pytest.raises(ValidationError):
        summarize(tmp_path)
    assert main(["summarize", str(tmp_path)]) == EXIT_VALIDATION


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    assert main(["validate", str(path)]) == EXIT_OK


def test_oracles_pass(capsys):
    assert main(["oracle", "all"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out
