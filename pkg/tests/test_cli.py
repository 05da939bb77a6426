"""Command-line interface: outputs, determinism, exit codes."""

import csv
import json
import subprocess
import sys

import pytest

from kslab.cli import main


def run(tmp_path, name, argv):
    out = tmp_path / name
    rc = main(argv + ["--out", str(out)])
    return rc, out


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_zeros_json_free_gas_linear(tmp_path):
    # Xi = 1 + z has its one zero at -1
    rc, out = run(tmp_path, "z.json",
                  ["zeros", "--potential", "ideal", "--L", "1", "--M", "1"])
    assert rc == 0
    doc = read_json(out)
    assert doc["meta"]["command"] == "zeros"
    assert doc["meta"]["seed"] == 42
    sm = doc["zeros"]["smallest"]
    assert sm["re"] == pytest.approx(-1.0, rel=1e-12)
    assert sm["im"] == 0.0
    rows = doc["zeros"]["zeros"]
    assert len(rows) == 1 and rows[0]["is_smallest"] == 1


def test_zeros_hard_rods_all_real_negative(tmp_path):
    rc, out = run(tmp_path, "z.csv",
                  ["zeros", "--L", "5", "--M", "6", "--format", "csv"])
    assert rc == 0
    rows = read_csv(out)
    assert len(rows) == 5
    assert all(float(r["im"]) == 0.0 for r in rows)
    assert all(float(r["re"]) < 0.0 for r in rows)
    marked = [r for r in rows if r["is_smallest"] == "1"]
    assert len(marked) == 1
    assert float(marked[0]["re"]) == pytest.approx(-0.416716009044, rel=1e-9)


def test_table_csv_free_gas(tmp_path):
    # unit box: Z_m = 1 for every m
    rc, out = run(tmp_path, "t.csv",
                  ["table", "--potential", "ideal", "--L", "1", "--M", "4",
                   "--format", "csv"])
    assert rc == 0
    rows = read_csv(out)
    assert [int(r["m"]) for r in rows] == [0, 1, 2, 3, 4]
    assert all(float(r["value"]) == 1.0 for r in rows)
    assert all(r["method"] == "exact" for r in rows)


def test_spectral_deterministic_up_to_timestamp(tmp_path):
    argv = ["spectral", "--L", "5", "--M", "6"]
    _, out1 = run(tmp_path, "s1.json", argv)
    _, out2 = run(tmp_path, "s2.json", argv)
    d1, d2 = read_json(out1), read_json(out2)
    d1["meta"].pop("created")
    d2["meta"].pop("created")
    assert d1 == d2
    assert d1["projection"]["rank"] == 1
    assert d1["projection"]["pole_order"] == 1


def test_table_cache_then_zeros(tmp_path):
    cache = tmp_path / "cache"
    cache.mkdir()
    rc, _ = run(tmp_path, "t.json",
                ["table", "--L", "5", "--M", "6", "--cache-dir", str(cache)])
    assert rc == 0
    rc, out = run(tmp_path, "z.json",
                  ["zeros", "--L", "5", "--M", "6", "--cache-dir", str(cache)])
    assert rc == 0
    assert read_json(out)["zeros"]["M"] == 6


def test_missing_cache_is_prerequisite_failure(tmp_path, capsys):
    cache = tmp_path / "empty"
    cache.mkdir()
    rc = main(["zeros", "--L", "5", "--M", "6", "--cache-dir", str(cache)])
    assert rc == 3
    assert "missing prerequisite" in capsys.readouterr().err


def test_config_errors_exit_2(capsys):
    assert main(["zeros", "--M", "4"]) == 2  # no --L
    assert main(["zeros", "--L", "5", "--a", "-1.0"]) == 2
    assert main(["residual", "--L", "5", "--M", "6", "--z", "0.9"]) == 2
    assert main(["residual", "--L", "5", "--M", "6", "--z", "nope"]) == 2
    assert main(["asymptotics", "--L", "1", "--potential", "ideal",
                 "--anchors", "a,b"]) == 2
    err = capsys.readouterr().err
    assert err.count("configuration error") == 5


def test_degenerate_polynomial_exits_4(capsys):
    assert main(["zeros", "--potential", "ideal", "--L", "1", "--M", "0"]) == 4
    assert "numerical failure" in capsys.readouterr().err


def test_residual_csv_levels(tmp_path):
    rc, out = run(tmp_path, "r.csv",
                  ["residual", "--potential", "ideal", "--L", "1", "--M", "4",
                   "--n-max", "2", "--z", "0.1", "--format", "csv"])
    assert rc == 0
    rows = read_csv(out)
    assert [int(r["n"]) for r in rows] == [1, 2]
    assert set(rows[0]) == {"n", "sup_residual", "error_bound",
                            "truncation_gap", "n_probes"}
    assert all(float(r["sup_residual"]) <= 1e-12 for r in rows)


def test_claimcheck_free_gas_consistent(tmp_path):
    rc, out = run(tmp_path, "cc.json",
                  ["claimcheck", "--potential", "ideal", "--L", "1", "--M", "6",
                   "--terms", "8"])
    assert rc == 0
    rows = read_json(out)["rows"]
    by_q = {r["quantity"]: r for r in rows}
    assert set(by_q) == {"activity series radius vs inverse kernel norm",
                         "smallest zero modulus recedes with truncation"}
    radius = by_q["activity series radius vs inverse kernel norm"]
    assert radius["claimed"] == radius["measured"] == float("inf")
    assert all(r["verdict"] == "consistent" for r in rows)


def test_claimcheck_hard_rods_rows(tmp_path):
    rc, out = run(tmp_path, "cc.json",
                  ["claimcheck", "--L", "5", "--M", "6", "--terms", "14"])
    assert rc == 0
    doc = read_json(out)
    by_q = {r["quantity"]: r for r in doc["rows"]}
    assert len(by_q) == 4
    # the operator norm bounds nothing about the true leading eigenvalue here
    assert by_q["spectral radius vs 1/xi"]["verdict"] == "inconsistent"
    assert by_q["density series sign pattern"]["verdict"] == "consistent"
    assert by_q["virial radius vs half inverse kernel norm"]["relation"] == "at_least"
    assert "policy" in doc


def test_cluster_extrapolated_source(tmp_path, capsys):
    rc, out = run(tmp_path, "cl.json",
                  ["cluster", "--L", "8", "--terms", "6", "--extrapolate"])
    assert rc == 0
    doc = read_json(out)
    assert doc["source"]["lengths"] == [8.0, 16.0, 32.0]
    assert doc["source"]["kept_orders"] == 6
    # 6 coefficients are too few for a radius fit; the payload says so
    assert doc["radius"] is None
    assert "radius not estimated" in capsys.readouterr().out


def test_virial_hard_rods_bound_row(tmp_path):
    rc, out = run(tmp_path, "v.json",
                  ["virial", "--L", "8", "--M", "9", "--terms", "10"])
    assert rc == 0
    doc = read_json(out)
    assert doc["bound"]["relation"] == "at_least"
    assert doc["bound"]["claimed"] == pytest.approx(0.25, rel=1e-12)
    coeffs = {r["n"]: r["coefficient"] for r in doc["virial_series"]}
    assert coeffs[1] == pytest.approx(1.0, rel=1e-10)


def test_potential_file_overrides_flags(tmp_path):
    cfg = tmp_path / "pot.json"
    cfg.write_text(json.dumps(
        {"family": "step", "a": 0.5, "epsilon": 1.0, "beta": 1.0}))
    rc, out = run(tmp_path, "t.csv",
                  ["table", "--potential-file", str(cfg), "--L", "3", "--M", "3",
                   "--format", "csv"])
    assert rc == 0
    assert len(read_csv(out)) == 4

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["table", "--potential-file", str(bad), "--L", "3"]) == 2
    assert main(["table", "--potential-file", str(tmp_path / "absent.json"),
                 "--L", "3"]) == 2


def test_asymptotics_free_gas_agreement(tmp_path, capsys):
    rc, out = run(tmp_path, "a.json",
                  ["asymptotics", "--potential", "ideal", "--L", "1", "--M", "4",
                   "--anchors", "0.5"])
    assert rc == 0
    doc = read_json(out)
    assert doc["asymptotics"]["agreement"] <= 1e-9
    assert "agreement" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kslab.cli", "zeros", "--potential", "ideal",
         "--L", "1", "--M", "2"],
        capture_output=True, text=True, cwd=str(tmp_path))
    assert proc.returncode == 0
    assert "smallest zero" in proc.stdout
