import csv
import math
import subprocess
import sys
from fractions import Fraction as F

import pytest

from expbasis.cli import SweepGrid, main
from expbasis.errors import ResourceError, ValidationError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def fields(text):
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line and not line.startswith(" "))


def read_sweep(path):
    with open(path) as fh:
        header = fh.readline().strip()
        rows = list(csv.DictReader(fh))
    return header, rows


def test_classify_examples(capsys):
    code, out, _ = run(capsys, "classify", "broken:a=0.3,L=0.8,r=1.1")
    assert code == 0
    assert fields(out)["frame"] == "true" and fields(out)["riesz_sequence"] == "false"
    code, out, _ = run(capsys, "classify", "square:h=0.7,theta=0.7853981634")
    assert fields(out)["frame"] == "true"
    code, out, _ = run(capsys, "classify", "intervals:0,2", "--oracle")
    f = fields(out)
    assert (f["riesz_sequence"], f["A"], f["B"], f["method"]) == ("true", "2", "2", "covering_oracle")


def test_classify_degrees(capsys):
    _, a, _ = run(capsys, "classify", "square:h=0.7,theta=45", "--deg")
    _, b, _ = run(capsys, "classify", f"square:h=0.7,theta={math.pi / 4!r}")
    assert a == b


def test_classify_validation_exit_code(capsys):
    code, out, err = run(capsys, "classify", "broken:a=2,L=1,r=0")
    assert code == 2 and out == "" and err.startswith("error:")
    with pytest.raises(SystemExit) as info:
        main(["classify"])
    assert info.value.code == 2


def test_covering_examples(capsys):
    _, out, _ = run(capsys, "covering", "intervals:0,0.6;1.0,1.4")
    assert out.splitlines()[-3:] == ["  [0, 0.4): 2", "  [0.4, 0.6): 1", "  [0.6, 1): 0"]
    _, out, _ = run(capsys, "covering", "box:1,0.5;0,1", "--resolution", "256")
    assert fields(out)["phi_min"] == "1" and fields(out)["phi_max"] == "1"
    _, out, _ = run(capsys, "covering", "intervals:0,1")
    assert out.splitlines()[-1] == "  [0, 1): 1"


def test_covering_cells_dump(capsys, tmp_path):
    path = tmp_path / "cells.csv"
    code, _, _ = run(capsys, "covering", "box:1,0;0,1", "--resolution", "8", "--cells", str(path))
    lines = path.read_text().splitlines()
    assert code == 0 and lines[0] == "# expbasis-csv v1" and len(lines) == 2 + 64


def test_covering_budget_exit_code(capsys):
    code, _, _ = run(capsys, "covering", "box:1,0,0;0,1,0;0,0,1", "--resolution", "5000")
    assert code == 3


def test_gram_examples(capsys):
    _, out, _ = run(capsys, "gram", "intervals:0,2", "--N", "8")
    assert (fields(out)["lambda_min"], fields(out)["lambda_max"]) == ("2", "2")
    _, out, _ = run(capsys, "gram", "intervals:0,1", "--N", "8")
    assert (fields(out)["lambda_min"], fields(out)["lambda_max"]) == ("1", "1")


def test_gram_identities(capsys):
    code, out, _ = run(capsys, "gram", "intervals:0,0.5", "--indices", "0,1", "--identities", "--trials", "5")
    f = fields(out)
    assert code == 0
    assert float(f["lambda_min"]) == pytest.approx(0.5 - 1 / math.pi, abs=1e-11)
    assert float(f["lambda_max"]) == pytest.approx(0.5 + 1 / math.pi, abs=1e-11)
    trials = [line for line in out.splitlines() if line.startswith("trial")]
    assert len(trials) == 5
    for line in trials:
        d12 = float(line.split("delta_12=")[1].split()[0])
        assert d12 < 1e-8


def test_gram_default_section_is_symmetric(capsys):
    # --N 1 is the 3x3 section over {-1, 0, 1}: eigenvalues 0.5 -+ sqrt(2)/pi
    _, out, _ = run(capsys, "gram", "intervals:0,0.5", "--N", "1")
    assert float(fields(out)["lambda_min"]) == pytest.approx(0.5 - math.sqrt(2) / math.pi, abs=1e-11)


def test_gram_errors(capsys):
    assert run(capsys, "gram", "square:h=0.7,theta=0.5", "--N", "40")[0] == 3
    assert run(capsys, "gram", "square:h=0.7,theta=0.5", "--N", "2", "--identities")[0] == 2
    assert run(capsys, "gram", "intervals:0,1", "--indices", "0,x")[0] == 2


def test_gram_dump(capsys, tmp_path):
    path = tmp_path / "g.csv"
    run(capsys, "gram", "intervals:0,1", "--N", "1", "--dump", str(path))
    lines = path.read_text().splitlines()
    assert lines[1] == "m,n,re,im" and len(lines) == 2 + 9


def test_sweep_broken_phase(tmp_path, capsys):
    path = tmp_path / "phase.csv"
    code, _, _ = run(capsys, "sweep", "broken", "--a", "0.1:0.9:0.1", "--L", "0.2:1.9:0.1",
                     "--r", "0:2.9:0.1", "--out", str(path))
    header, rows = read_sweep(path)
    assert code == 0 and header == "# expbasis-csv v1"
    assert list(rows[0]) == ["a", "L", "r", "frame", "riesz_seq", "riesz_basis", "complete", "onb", "warnings"]
    assert len(rows) == 9 * 18 * 30
    checked = 0
    for row in rows:
        if row["frame"] == "":
            assert row["warnings"] == "1"
            continue
        L, r = F(row["L"]), F(row["r"])
        assert (row["frame"] == "true") == (L + r - math.floor(r) <= 1)
        checked += 1
    assert checked > 3000


def test_sweep_square(tmp_path, capsys):
    path = tmp_path / "one.csv"
    run(capsys, "sweep", "square", "--h", "0.9:0.9:1", "--theta", "0:0:1", "--out", str(path))
    _, rows = read_sweep(path)
    assert len(rows) == 1
    assert (rows[0]["h"], rows[0]["theta"], rows[0]["frame"], rows[0]["riesz_seq"]) == ("0.9", "0", "true", "false")


def test_sweep_square_boundary_follows_printed_threshold(tmp_path, capsys):
    path = tmp_path / "sq.csv"
    run(capsys, "sweep", "square", "--h", "0.1:1.5:0.01", "--theta", "0:0.7853:0.0157", "--out", str(path))
    _, rows = read_sweep(path)
    assert len(rows) == 141 * 51
    for row in rows:
        h, t = float(row["h"]), float(row["theta"])
        thr = 1 / (math.sin(t) + math.cos(t))
        if abs(h - thr) > 1e-9:
            assert (row["frame"] == "true") == (h <= thr)


def test_sweep_parallel_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "square", "--h", "0.5:1.2:0.05", "--theta", "0:0.8:0.1"]
    run(capsys, *args, "--out", str(a))
    run(capsys, *args, "--out", str(b), "--jobs", "3")
    assert a.read_bytes() == b.read_bytes()


def test_sweep_errors(capsys):
    assert run(capsys, "sweep", "square", "--h", "0:1:1e-6", "--theta", "0:1:1")[0] == 3
    assert run(capsys, "sweep", "square", "--h", "0:1:0", "--theta", "0:1:1")[0] == 2
    assert run(capsys, "sweep", "square", "--h", "1:0:0.1", "--theta", "0:1:1")[0] == 2
    assert run(capsys, "sweep", "broken", "--a", "0.1:0.2:0.1")[0] == 2
    assert run(capsys, "sweep", "square", "--h", "abc", "--theta", "0:1:1")[0] == 2


def test_sweep_grid():
    g = SweepGrid(("x", "y"), (SweepGrid.parse_range("0:1:0.5"), SweepGrid.parse_range("1:1:1")))
    assert g.count == 3
    assert list(g.points()) == [(0, 1), (F(1, 2), 1), (1, 1)]
    with pytest.raises(ResourceError):
        SweepGrid(("x",), ((F(0), F(10), F(1, 10 ** 6)),))
    with pytest.raises(ValidationError):
        SweepGrid.parse_range("0:1")


def test_deterministic_output(capsys):
    outs = {run(capsys, "classify", "box:1,0.5;0,1", "--resolution", "64")[1] for _ in range(2)}
    assert len(outs) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "expbasis", "classify", "intervals:0,1"],
                          capture_output=True, text=True, check=True)
    assert "orthonormal_basis: true" in proc.stdout
