import csv
import subprocess
import sys

import pytest

import desk
from chipletplan.cli import EXIT_CONFIG, EXIT_IO, EXIT_SOLVE, EXIT_TABLES, main
from chipletplan.compare import REPORT_COLUMNS
from chipletplan.io import (load_tables, parse_system_spec, persist_tables,
                            serialize_system_spec)


@pytest.fixture
def work(tmp_path):
    spec = tmp_path / "desk.yaml"
    spec.write_text(serialize_system_spec(desk.two_chiplet()))
    tables = tmp_path / "desk.bin"
    persist_tables(desk.desk_tables(), tables)
    return tmp_path, str(spec), str(tables)


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_gen_to_stdout_and_file(tmp_path, capsys):
    assert main(["gen", "--chiplets", "5", "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert parse_system_spec(text).n == 5
    out = tmp_path / "s.yaml"
    assert main(["gen", "--chiplets", "5", "--seed", "3", "--out", str(out)]) == 0
    assert out.read_text() == text


def test_characterize_matches_library(work):
    tmp, spec, _ = work
    out = tmp / "fresh.bin"
    assert main(["characterize", "--spec", spec, "--out", str(out)]) == 0
    assert load_tables(out) == desk.desk_tables()


def test_evaluate_fast_and_reference(work, capsys):
    tmp, spec, tables = work
    fp = tmp / "fp.csv"
    fp.write_text("name,ix,iy\ncpu,0,0\nmem,4,0\n")
    assert main(["evaluate", "--spec", spec, "--tables", tables, "--floorplan", str(fp)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "reward,wirelength_mm,max_temperature_k,backend"
    assert out[1].endswith(",fast")
    assert main(["evaluate", "--spec", spec, "--reference", "--floorplan", str(fp)]) == 0
    ref = capsys.readouterr().out.splitlines()[1].split(",")
    fast = out[1].split(",")
    assert ref[1] == fast[1] and ref[3] == "reference"


def test_train_writes_outputs(work):
    tmp, spec, tables = work
    out = tmp / "train"
    assert main(["train", "--spec", spec, "--tables", tables, "--epochs", "3",
                 "--out", str(out)]) == 0
    for name in ("metrics.csv", "checkpoint.npz", "floorplan.csv", "summary.csv",
                 "floorplan.svg"):
        assert (out / name).exists(), name
    assert len(rows(out / "metrics.csv")) == 4


def test_anneal_writes_outputs(work):
    tmp, spec, tables = work
    out = tmp / "sa"
    assert main(["anneal", "--spec", spec, "--tables", tables, "--iterations", "50",
                 "--out", str(out)]) == 0
    trace = rows(out / "trace.csv")
    assert trace[0] == ["iteration", "tau", "reward", "best_reward"] and len(trace) == 51


def test_compare_rows(work):
    tmp, spec, tables = work
    out = tmp / "cmp.csv"
    assert main(["compare", "--spec", spec, "--budget-seconds", "0.2", "--seeds", "0,1",
                 "--out", str(out)]) == 0
    table = rows(out)
    assert tuple(table[0]) == REPORT_COLUMNS and len(table) == 1 + 2 * 4
    assert all(r[0] == "desk" and r[-1] == "ok" for r in table[1:])


def test_exit_codes(work, tmp_path, capsys):
    tmp, spec, tables = work
    bad = tmp / "bad.yaml"
    bad.write_text("interposer: {}\n")
    assert main(["evaluate", "--spec", str(bad)]) == EXIT_CONFIG
    assert "interposer" in capsys.readouterr().err
    assert main(["evaluate", "--spec", str(tmp / "missing.yaml")]) == EXIT_IO
    junk = tmp / "junk.bin"
    junk.write_bytes(b"xx")
    assert main(["evaluate", "--spec", spec, "--tables", str(junk)]) == EXIT_TABLES
    packed = tmp / "packed.yaml"
    # every first placement of the big chiplet leaves no room for the small one
    text = serialize_system_spec(desk.two_chiplet())
    text = text.replace("width_mm: 4.0, height_mm: 4.0", "width_mm: 14.0, height_mm: 14.0")
    packed.write_text(text.replace("width_mm: 4.0, height_mm: 2.0", "width_mm: 2.0, height_mm: 2.0"))
    assert main(["anneal", "--spec", str(packed), "--tables", tables, "--iterations", "5",
                 "--out", str(tmp / "p")]) == EXIT_SOLVE
    assert main(["anneal", "--spec", spec, "--tables", tables, "--out", str(tmp / "q")]) \
        == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["compare", "--budget-seconds", "1", "--seeds", "a,b"])
    assert info.value.code == 2


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "chipletplan.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("chipletplan ")
