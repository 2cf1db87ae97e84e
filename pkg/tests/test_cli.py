import json
import subprocess
import sys

import pytest

from fermatlab import cli
from fermatlab.fermat import FactorDatabase, FactorRecord

SUBCOMMANDS = [
    "pepin", "lucas-lehmer", "trace", "factorize", "factor-search", "classify", "dubner-keller",
    "identities", "kfull-ratio", "mertens", "selberg-window", "second-moment", "balls-cups", "prob",
    "expectation", "interval-req", "harmonic", "mersenne-census",
]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def lines(out):
    return [json.loads(x) for x in out.splitlines()]


def test_pepin_f5(capsys):
    code, out, _ = run(capsys, "pepin", "--n", "5", "--workers", "1")
    header, verdict = lines(out)
    assert code == 0 and header["kind"] == "header" and header["subcommand"] == "pepin"
    assert header["params"] == {"ferma_t": False, "n": 5}
    assert verdict["status"] == "composite" and verdict["n"] == 5


def test_pepin_ferma_t_zero(capsys):
    code, out, _ = run(capsys, "pepin", "--n", "0", "--ferma-t")
    assert code == 0 and lines(out)[1]["status"] == "prime"


def test_expectation_title_claim(capsys):
    code, out, _ = run(capsys, "expectation", "--model", "fullness-ratio", "--from", "33")
    rep = lines(out)[1]
    assert code == 0
    assert rep["closed_form"] == "1/1073741824"
    assert "9.31323e-10 < 1e-9" in rep["comparison"]


def test_balls_cups_one_cup(capsys):
    code, out, _ = run(capsys, "balls-cups", "--C", "1", "--B", "7", "--trials", "3")
    assert code == 0 and lines(out)[1]["pass_fraction"] == 1.0


def test_factor_search_641(capsys, tmp_path):
    db = tmp_path / "f.jsonl"
    code, out, _ = run(capsys, "factor-search", "--n", "5", "--k-max", "5", "--m-max", "7", "--db", str(db), "--workers", "1")
    rec = lines(out)[1]
    assert code == 0 and (rec["n"], rec["k"], rec["m"], rec["p"], rec["verified"]) == (5, 5, 7, 641, True)
    assert [(r.n, r.p) for r in FactorDatabase.load(db).records] == [(5, 641)]


class TestExitCodes:
    def test_domain(self, capsys):
        code, _, err = run(capsys, "pepin", "--n", "0")
        assert code == 1 and err.count("\n") == 1

    def test_usage(self, capsys):
        with pytest.raises(SystemExit) as e:
            cli.main(["pepin"])
        assert e.value.code == 1

    def test_unknown_parameter(self, capsys):
        with pytest.raises(SystemExit) as e:
            cli.main(["mertens", "--colour", "red"])
        assert e.value.code == 1

    def test_resource(self, capsys):
        code, _, err = run(capsys, "pepin", "--n", "24")
        assert code == 2 and "resource refusal" in err

    def test_env_bit_budget(self, capsys, monkeypatch):
        monkeypatch.setenv(cli.ENV_BIT_BUDGET, "16")
        code, _, _ = run(capsys, "pepin", "--n", "5")
        assert code == 2
        code, out, _ = run(capsys, "pepin", "--n", "5", "--bit-budget", "64")
        assert code == 0 and lines(out)[0]["bit_budget"] == 64

    def test_effort_exhausted(self, capsys):
        code, out, _ = run(capsys, "factorize", str((1 << 128) + 1), "--effort-budget", "16")
        assert code == 0 and lines(out)[1]["complete"] is False


class TestDatabase:
    def test_f5_record_passes(self, capsys, tmp_path):
        path = tmp_path / "f.jsonl"
        FactorDatabase([FactorRecord(5, 5, 7, 641).verify()]).save(path)
        code, out, _ = run(capsys, "db", "verify", str(path))
        summary = lines(out)[-1]
        assert code == 0 and summary["passed"] and summary["records"] == 1

    def test_empty_db_passes(self, capsys, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_bytes(b"")
        code, out, _ = run(capsys, "db", "verify", str(path))
        assert code == 0 and lines(out)[-1]["records"] == 0

    def test_tampered_digit(self, capsys, tmp_path):
        path = tmp_path / "f.jsonl"
        FactorDatabase([FactorRecord(5, 5, 7, 641).verify()]).save(path)
        data = path.read_bytes()
        path.write_bytes(data.replace(b'"p":"641"', b'"p":"647"'))
        code, out, err = run(capsys, "db", "verify", str(path))
        rep = lines(out)[1]
        assert code == 3 and not rep["records"][0]["passed"]
        assert f"byte offset {rep['checksum_offset']}" in err

    def test_env_db_and_seed(self, capsys, tmp_path, monkeypatch):
        path = tmp_path / "seed.jsonl"
        code, _, _ = run(capsys, "db", "seed", str(path))
        assert code == 0
        monkeypatch.setenv(cli.ENV_DB, str(path))
        code, out, _ = run(capsys, "classify", "--n-lo", "33", "--n-hi", "43")
        rep = lines(out)[1]
        assert rep["list_a"] == [36, 37, 38, 39, 42, 43] and rep["list_b"] == [33, 34, 35, 40, 41]


class TestFormats:
    def test_csv(self, capsys):
        code, out, _ = run(capsys, "balls-cups", "--C", "4", "--B", "40", "--trials", "5", "--format", "csv")
        rows = [r for r in out.splitlines() if not r.startswith("#")]
        assert code == 0 and rows[0].split(",")[-3:] == ["trial", "max_relative_deviation", "min_relative_deviation"]
        assert len(rows) == 6
        assert any(r.startswith("# subcommand=") for r in out.splitlines())

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "out.jsonl"
        code, out, _ = run(capsys, "mertens", "--B", "1000", "-o", str(target))
        assert code == 0 and out == "" and lines(target.read_text())[1]["B"] == 1000

    @pytest.mark.parametrize("argv", [
        ["balls-cups", "--C", "20", "--trials", "30", "--seed", "4"],
        ["selberg-window", "--x", "100000", "--samples", "20", "--seed", "2"],
        ["expectation", "--model", "naive"],
        ["factor-search", "--n-lo", "5", "--n-hi", "12", "--k-max", "301", "--m-max", "18", "--workers", "2"],
    ])
    def test_byte_identical(self, capsys, argv):
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help(name, capsys):
    with pytest.raises(SystemExit) as e:
        cli.main([name, "--help"])
    out = capsys.readouterr().out
    assert e.value.code == 0 and "--format" in out and "default" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fermatlab", "trace", "--p", "641"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout.splitlines()[1])["hit_index"] == 5
