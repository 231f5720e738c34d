import csv
import io

import numpy as np
import pytest

from wavemult.errors import ConvergenceError, ValidationError
from wavemult.harness import cli
from wavemult.harness.config import SCHEMA, resolve
from wavemult.harness.store import CSV_COLUMNS, OUT_ENV, RecordStore, read_plotdata, series_id
from wavemult.sharpness import fit_slope


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def case1_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("case1")
    code, out, err = invoke("--out", str(d), "sharpness", "--case", "1", "--p", "1", "--q", "1")
    assert code == 0, err
    return d, out


def test_success_exit_and_outputs(case1_dir):
    d, out = case1_dir
    assert {"records.jsonl", "summary.csv", "plotdata.dat"} <= {p.name for p in d.iterdir()}
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)


def test_summary_schema_and_rows(case1_dir):
    d, _ = case1_dir
    with open(d / "summary.csv") as fh:
        assert fh.readline().strip() == ",".join(CSV_COLUMNS)
    rows = read_summary(d / "summary.csv")
    per_j = [r for r in rows if r["j"]]
    fitted = [r for r in rows if not r["j"]]
    assert [int(r["j"]) for r in per_j] == [5, 6, 7, 8]
    assert len(fitted) == 1 and fitted[0]["verdict"] == "PASS"
    assert float(fitted[0]["slope"]) == pytest.approx(1.0, abs=0.2)
    assert rows[-1] is fitted[0]


def test_plotdata_refit(case1_dir):
    d, _ = case1_dir
    blocks = read_plotdata(d / "plotdata.dat")
    assert len(blocks) == 1
    (js, ys), = blocks.values()
    rows = read_summary(d / "summary.csv")
    refit = fit_slope(js, 2.0 ** np.array(ys)).slope
    assert refit == pytest.approx(float(rows[-1]["slope"]), abs=1e-12)


def test_rerun_is_idempotent(tmp_path):
    args = ("--out", str(tmp_path), "sharpness", "--case", "1", "--p", "1", "--q", "1", "--jmin", "4", "--jmax", "6")
    assert invoke(*args)[0] == 0
    first = (tmp_path / "summary.csv").read_text()
    assert invoke(*args)[0] == 0
    assert (tmp_path / "summary.csv").read_text() == first
    assert len(RecordStore(tmp_path).load()) == 3
    assert len((tmp_path / "records.jsonl").read_text().splitlines()) == 6


def test_two_series_are_kept_apart(tmp_path):
    for p in ("1", "2"):
        assert invoke("--out", str(tmp_path), "sharpness", "--case", "1", "--p", p, "--q", p,
                      "--jmin", "4", "--jmax", "6")[0] == 0
    rows = read_summary(tmp_path / "summary.csv")
    assert len(rows) == 8
    assert [r["p"] for r in rows] == ["1.0"] * 4 + ["2.0"] * 4


def test_validation_exit(tmp_path):
    code, _, err = invoke("--out", str(tmp_path), "sharpness", "--case", "1", "--p", "3", "--q", "1")
    assert code == 2 and "validation error" in err


def test_argparse_error_exit(tmp_path):
    assert invoke("--out", str(tmp_path), "sharpness", "--case", "7")[0] == 2


def test_convergence_exit(tmp_path, monkeypatch):
    def boom(settings):
        raise ConvergenceError("no luck", {"change": 1.0})

    monkeypatch.setitem(cli.HANDLERS, "l1-probe", boom)
    code, _, err = invoke("--out", str(tmp_path), "l1-probe")
    assert code == 3 and "diagnostics" in err


def test_report_on_empty_store(tmp_path):
    assert invoke("--out", str(tmp_path), "report")[0] == 2


def test_report_formats(case1_dir, tmp_path):
    d, _ = case1_dir
    code, out, _ = invoke("--out", str(d), "report", "--format", "jsonl")
    assert code == 0 and "report.jsonl" in out
    assert len((d / "report.jsonl").read_text().splitlines()) == 4


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert invoke("sharpness", "--case", "1", "--p", "2", "--q", "2", "--jmin", "4", "--jmax", "6")[0] == 0
    assert (tmp_path / "env" / "summary.csv").exists()


def test_config_file_and_flag_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[sharpness]\ncase = 1\np = 2\nq = 2\njmin = 4\njmax = 6\n\n[output]\ndir = %s\n" % (tmp_path / "o"))
    cfg = resolve("sharpness", {"p": 1.0, "q": None}, ini)
    assert cfg["p"] == 1.0 and cfg["q"] == 2.0 and cfg["jmin"] == 4
    assert cfg.out_dir == str(tmp_path / "o")
    code, _, _ = invoke("--config", str(ini), "sharpness", "--p", "1", "--q", "1")
    assert code == 0
    rows = read_summary(tmp_path / "o" / "summary.csv")
    assert {r["p"] for r in rows} == {"1.0"} and len(rows) == 4


def test_defaults_match_schema():
    cfg = resolve("upper-bound", {})
    assert cfg.settings == {k: v for k, (_, v) in SCHEMA["upper-bound"].items()}


@pytest.mark.parametrize("text", ["[sharpness]\nbogus = 1\n", "[nonsense]\nx = 1\n", "[sharpness]\np = abc\n"])
def test_bad_config_file(tmp_path, text):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    with pytest.raises(ValidationError):
        resolve("sharpness", {}, ini)
    assert invoke("--config", str(ini), "--out", str(tmp_path), "sharpness")[0] == 2


def test_series_id_stable():
    a = series_id("1", {"p": 1.0, "js": [5, 6]})
    assert a == series_id("1", {"js": [5, 6], "p": 1.0})
    assert a != series_id("1", {"p": 2.0, "js": [5, 6]})


def test_partition_check_command(tmp_path):
    code, out, err = invoke("--out", str(tmp_path), "partition-check", "--trials", "3")
    assert code == 0, err
    rows = read_summary(tmp_path / "summary.csv")
    assert rows and all(r["verdict"] == "PASS" for r in rows)


def test_l1_probe_command(tmp_path):
    code, _, err = invoke("--out", str(tmp_path), "l1-probe", "--jmin", "3", "--jmax", "6")
    assert code == 0, err
    fitted = [r for r in read_summary(tmp_path / "summary.csv") if not r["j"]]
    assert fitted[0]["verdict"] == "PASS"


def test_expand_symbol_command(tmp_path):
    code, _, err = invoke("--out", str(tmp_path), "expand-symbol", "--points", "200")
    assert code == 0, err
    assert all(r["verdict"] == "PASS" for r in read_summary(tmp_path / "summary.csv"))


def test_kernel_scan_rejects_n1(tmp_path):
    assert invoke("--out", str(tmp_path), "kernel-scan", "--n", "1")[0] == 2
