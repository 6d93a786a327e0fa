"""CLI behavior: subcommands, formats, exit codes."""

import csv
import io
import json

from dpl.cli import main

JSON_KEYS = ["identity", "params", "digits", "strategy", "lhs", "rhs",
             "residual", "bound", "pass", "elapsed_ms"]


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_verify_pass_text(capsys):
    code, out, _ = run(capsys, "verify", "--id", "euler-sum", "--l", "3")
    assert code == 0
    assert "[pass] euler-sum" in out


def test_verify_json_schema(capsys):
    code, out, _ = run(capsys, "verify", "--id", "aux-phi", "--s", "2",
                       "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert list(doc.keys()) == JSON_KEYS
    assert set(doc["lhs"].keys()) == {"re", "im"}
    assert doc["pass"] is True


def test_verify_csv_projection(capsys):
    code, out, _ = run(capsys, "verify", "--id", "aux-phi", "--s", "2,3",
                       "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["identity", "params", "digits", "strategy", "lhs_re", "lhs_im",
                       "rhs_re", "rhs_im", "residual", "bound", "pass", "elapsed_ms"]
    assert len(rows) == 3


def test_verify_domain_error_exit2(capsys):
    code, _, err = run(capsys, "verify", "--id", "thm-1.1", "--k", "1",
                       "--b", "2", "--x", "1")
    assert code == 2
    assert "outside (0,1]" in err


def test_unknown_identity_exit2(capsys):
    code, _, err = run(capsys, "verify", "--id", "thm-9.9")
    assert code == 2
    assert "near matches" in err


def test_residual_failure_exit1(tmp_path, monkeypatch, capsys):
    # a deliberately false identity must fail with exit code 1
    (tmp_path / "false.dpl").write_text(
        'identity "false" params (k: int >= 1) {\n'
        "  lhs: 1 * [ single(n>=1) 1 / (n^(k+2)) ];\n"
        "  rhs: 2 * [ single(n>=1) 1 / (n^(k+2)) ];\n}\n")
    (tmp_path / "false.meta.json").write_text(
        '{"id": "false", "paper_ref": "negative control", "tags": [],'
        ' "tolerance": "1e-10", "strategy": "reduction", "battery": [{"k": "1"}]}\n')
    monkeypatch.setenv("DPL_IDENTITY_DIR", str(tmp_path))
    code, out, _ = run(capsys, "verify", "--id", "false")
    assert code == 1
    assert "FAIL" in out


def test_sweep_aggregates(capsys):
    code, out, err = run(capsys, "sweep", "--id", "gkz-odd", "--N", "2..4")
    assert code == 0
    assert "3/3 pass" in err


def test_derive_commands(capsys):
    code, out, _ = run(capsys, "derive", "--from", "prop-4.3", "--to", "thm-4.1",
                       "--k", "1..2")
    assert code == 0
    assert "exact multiset match" in out
    code, _, err = run(capsys, "derive", "--from", "thm-1.1", "--to", "cor-1.3")
    assert code == 2
    assert "not a registered partial-fraction pair" in err


def test_derive_json(capsys):
    code, out, _ = run(capsys, "derive", "--from", "prop-4.5", "--to", "thm-4.4",
                       "--k", "1", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["pass"] and doc["samples"][0]["k"] == 1


def test_eval_term(capsys):
    code, out, _ = run(capsys, "eval-term",
                       "sum(m>=1,n>=1) x^n / (m*(m+n)^3)", "--x", "1/2",
                       "--digits", "30")
    assert code == 0
    doc = json.loads(out)
    assert doc["method"] == "reduction"
    assert abs(float(doc["value"]["re"]) - 0.0930971259917686) < 1e-12


def test_eval_term_with_symbols(capsys):
    code, out, _ = run(capsys, "eval-term",
                       "single(n>=1) x^n / (n^(k+2))", "--x", "1", "--k", "1",
                       "--digits", "30")
    assert code == 0
    doc = json.loads(out)
    assert abs(float(doc["value"]["re"]) - 1.2020569031595943) < 1e-12


def test_list_output(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    assert len(out.strip().splitlines()) == 25
    code, out, _ = run(capsys, "list", "--filter", "character")
    assert [line.split()[0] for line in out.strip().splitlines()] == \
        ["cor-1.3", "cor-1.5-L"]


def test_out_file(tmp_path, capsys):
    path = tmp_path / "report.json"
    code, out, _ = run(capsys, "verify", "--id", "aux-phi", "--s", "2",
                       "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["identity"] == "aux-phi"


def test_digits_bounds(capsys):
    code, _, err = run(capsys, "verify", "--id", "aux-phi", "--s", "2",
                       "--digits", "10")
    assert code == 2 and "digits" in err


def test_jobs_parallel(capsys):
    code, _, err = run(capsys, "sweep", "--id", "aux-phi", "--s", "2..5",
                       "--jobs", "2")
    assert code == 0
    assert "4/4 pass" in err


def test_evaluation_failure_exit3(tmp_path, monkeypatch, capsys):
    # forcing the reduction strategy onto an uncatalogued shape is an
    # evaluation failure, not a usage error
    (tmp_path / "hard.dpl").write_text(
        'identity "hard" params (s: real >= 1, x: unit, b: b01) {\n'
        "  lhs: 1 * [ sum(m>=1,n>=0) x^(m+n) / (m * (n+b) * (m+n+b)^s) ];\n"
        "  rhs: 1 * [ sum(m>=1,n>=0) x^(m+n) / (m * (n+b) * (m+n+b)^s) ];\n}\n")
    (tmp_path / "hard.meta.json").write_text(
        '{"id": "hard", "paper_ref": "shape gap", "tags": [], "tolerance": "1e-8",'
        ' "strategy": "reduction", "battery": [{"s": "3/2", "x": "1", "b": "1/2"}]}\n')
    monkeypatch.setenv("DPL_IDENTITY_DIR", str(tmp_path))
    code, _, err = run(capsys, "verify", "--id", "hard", "--strategy", "reduction")
    assert code == 3
    assert "evaluation error" in err


def test_verify_example_n3_at_30_digits(capsys):
    code, out, _ = run(capsys, "verify", "--id", "example-n3", "--digits", "30")
    assert code == 0 and "[pass]" in out


def test_sweep_congruence_battery(capsys):
    code, _, err = run(capsys, "sweep", "--id", "thm-4.1", "--N", "1,3",
                       "--k", "1", "--x", "1,0.5")
    assert code == 0
    assert "4/4 pass" in err
